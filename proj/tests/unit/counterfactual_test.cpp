#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "cpo/corpus.hpp"
#include "cpo/counterfactual.hpp"
#include "support/expect.hpp"
#include "support/generators.hpp"

namespace cpo {
namespace {

bool has(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

class CardiomegalyReport : public ::testing::Test {
 protected:
  const ConceptGraph& graph = demo_graph();
  const Vocab vocab = Vocab::from_graph(graph, std::vector<std::string>{"report"});
  const Lexicon lexicon{graph, vocab};
  // Cardiomegaly report that rules out consolidation.
  const Trajectory factual = render_trajectory(
      {{"enlarged cardiac silhouette", true}, {"focal consolidation", false}}, "cardiomegaly",
      vocab, tokenize("report", vocab));
};

TEST_F(CardiomegalyReport, PlanInsertsTheNegatedTargetFinding) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto plan = plan_perturbation(graph, lexicon, factual, "pneumonia", seed);
    EXPECT_EQ(plan.flip_answer, "pneumonia");
    EXPECT_TRUE(has(plan.insert, "focal consolidation"));
    EXPECT_TRUE(plan.negate_or_remove.empty());
  }
}

TEST_F(CardiomegalyReport, CounterfactualKeepsSourceFindingsAndFlipsAnswer) {
  const auto pair = generate_pair(graph, lexicon, vocab, factual, "pneumonia", 3);
  const auto& cf = pair.counterfactual;
  EXPECT_EQ(cf.answer, vocab.label_of("pneumonia"));
  const TokenSeq raw = cf.raw(vocab);
  EXPECT_EQ(raw[raw.size() - 2], vocab.label_of("pneumonia"));
  const auto findings = lexicon.extract(cf.thinking);
  EXPECT_NE(std::find(findings.begin(), findings.end(), Mention{"focal consolidation", true}),
            findings.end());
  EXPECT_NE(std::find(findings.begin(), findings.end(),
                      Mention{"enlarged cardiac silhouette", true}),
            findings.end());
  EXPECT_EQ(pair.source_entity, "cardiomegaly");
  EXPECT_EQ(pair.target_entity, "pneumonia");
}

TEST_F(CardiomegalyReport, DegenerateAndUnknownTargets) {
  EXPECT_CPO_ERROR(plan_perturbation(graph, lexicon, factual, "cardiomegaly", 0),
                   ErrorCode::kDegenerateTarget);
  EXPECT_CPO_ERROR(plan_perturbation(graph, lexicon, factual, "gout", 0),
                   ErrorCode::kUnknownEntity);
}

ConceptGraph two_entity_graph() {
  ConceptGraph g;
  g.add_entity("src");
  g.add_entity("bare");
  g.add_entity("rich");
  for (const char* a : {"alpha", "beta", "gamma", "delta"}) {
    g.add_attribute(a, AttributeCategory::kMorphological);
  }
  g.set_relation("src", "alpha", RelationKind::kAssociation);
  g.set_relation("rich", "beta", RelationKind::kAssociation);
  g.set_relation("rich", "gamma", RelationKind::kAssociation);
  g.set_relation("rich", "alpha", RelationKind::kExclusion);
  return g;
}

TEST(Counterfactual, TargetWithoutAssociationsOnlyFlipsAnswer) {
  const auto g = two_entity_graph();
  const Vocab v = Vocab::from_graph(g);
  const Lexicon lex(g, v);
  const auto factual = render_trajectory({{"alpha", true}, {"delta", true}}, "src", v);
  const auto plan = plan_perturbation(g, lex, factual, "bare", 9);
  EXPECT_TRUE(plan.insert.empty());
  EXPECT_TRUE(plan.negate_or_remove.empty());
  const auto cf = apply_plan(plan, factual, lex, v);
  EXPECT_EQ(cf.thinking, factual.thinking);
  EXPECT_EQ(cf.answer, v.label_of("bare"));
}

TEST(Counterfactual, TwoInsertionsAddTwoMentions) {
  const auto g = two_entity_graph();
  const Vocab v = Vocab::from_graph(g);
  const Lexicon lex(g, v);
  const auto factual = render_trajectory({{"delta", true}}, "src", v);
  PerturbationPlan plan;
  plan.keep = {"delta"};
  plan.insert = {"beta", "gamma"};
  plan.flip_answer = "rich";
  const auto cf = apply_plan(plan, factual, lex, v);
  const auto before = extract_findings(factual.thinking, v, g);
  const auto after = extract_findings(cf.thinking, v, g);
  EXPECT_EQ(after.size(), before.size() + 2);
}

TEST(Counterfactual, ExcludedPresentFindingIsNegated) {
  const auto g = two_entity_graph();
  const Vocab v = Vocab::from_graph(g);
  const Lexicon lex(g, v);
  const auto factual = render_trajectory({{"alpha", true}}, "src", v);
  const auto plan = plan_perturbation(g, lex, factual, "rich", 4);
  EXPECT_EQ(plan.negate_or_remove, (std::vector<std::string>{"alpha"}));
  const auto after = lex.extract(apply_plan(plan, factual, lex, v).thinking);
  EXPECT_NE(std::find(after.begin(), after.end(), Mention{"alpha", false}), after.end());
}

TEST(Counterfactual, SingleFactualSingleTargetGivesOnePair) {
  ConceptGraph g;
  g.add_entity("a");
  g.add_entity("b");
  g.add_attribute("x", AttributeCategory::kDensity);
  g.set_relation("b", "x", RelationKind::kAssociation);
  const Vocab v = Vocab::from_graph(g);
  const auto pairs = generate_pairs(g, v, {render_trajectory({}, "a", v)}, 1);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].target_entity, "b");
}

TEST(Counterfactual, PairCountIsSumOfValidTargets) {
  const WorldSpec spec = demo_world_spec();
  const Vocab vocab = world_vocab(spec);
  const auto records = generate_world(spec, 200, 11);
  std::vector<Trajectory> factuals;
  std::size_t expected = 0;
  for (const auto& r : records) {
    factuals.push_back(r.trajectory);
    const std::string source = vocab.text(r.trajectory.answer);
    for (const auto& e : spec.graph.entities()) {
      const bool exclusive = spec.graph.exclusions().contains({source, e});
      if (e != source && !exclusive) ++expected;
    }
  }
  const auto pairs = generate_pairs(spec.graph, vocab, factuals, 5);
  EXPECT_EQ(pairs.size(), expected);
  EXPECT_EQ(generate_pairs(spec.graph, vocab, factuals, 5), pairs);
}

TEST(Counterfactual, ValidTargetsSkipExclusiveEntities) {
  const auto targets = valid_targets(demo_graph(), "emphysema");
  EXPECT_FALSE(has(targets, "emphysema"));
  EXPECT_FALSE(has(targets, "atelectasis"));
  EXPECT_TRUE(std::is_sorted(targets.begin(), targets.end()));
}

TEST(CounterfactualProperty, PlansAndPairsOnRandomGraphs) {
  Rng rng(0xa54ff53a);
  std::size_t checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const auto graph = testing::random_graph(rng);
    const Vocab vocab = Vocab::from_graph(graph);
    const Lexicon lexicon(graph, vocab);
    const auto source = testing::random_entity(rng, graph);
    const auto factual = testing::random_factual(rng, graph, vocab, source,
                                                 testing::random_context(rng, vocab));
    const auto present_before = [&] {
      std::set<std::string> out;
      for (const auto& m : lexicon.extract(factual.thinking)) {
        if (m.present) out.insert(m.attribute);
      }
      return out;
    }();
    for (const auto& target : valid_targets(graph, source)) {
      const std::uint64_t seed = rng.next();
      const auto plan = plan_perturbation(graph, lexicon, factual, target, seed);
      for (const auto& a : plan.insert) {
        EXPECT_EQ(graph.relation_of(target, a), RelationKind::kAssociation);
        EXPECT_FALSE(has(plan.negate_or_remove, a));
        EXPECT_FALSE(present_before.contains(a));
      }
      for (const auto& a : plan.negate_or_remove) {
        EXPECT_EQ(graph.relation_of(target, a), RelationKind::kExclusion);
      }
      std::size_t candidates = 0;
      for (const auto& a : graph.associated_attributes(target)) {
        candidates += present_before.contains(a) ? 0 : 1;
      }
      if (candidates > 0) {
        EXPECT_GE(plan.insert.size(), 1u);
        EXPECT_LE(plan.insert.size(), candidates);
      }

      const auto pair = generate_pair(graph, lexicon, vocab, factual, target, seed);
      EXPECT_EQ(pair, generate_pair(graph, lexicon, vocab, factual, target, seed));
      EXPECT_EQ(pair.counterfactual.context, pair.preferred.context);
      EXPECT_EQ(pair.counterfactual.answer, vocab.label_of(target));
      EXPECT_NE(pair.counterfactual.answer, pair.preferred.answer);

      const auto after = lexicon.extract(pair.counterfactual.thinking);
      for (const auto& m : after) {
        if (m.present) {
          EXPECT_NE(graph.relation_of(target, m.attribute), RelationKind::kExclusion);
        }
      }
      for (const auto& a : plan.insert) {
        EXPECT_NE(std::find(after.begin(), after.end(), Mention{a, true}), after.end());
      }
      const auto before = lexicon.extract(factual.thinking);
      for (const auto& a : plan.keep) {
        for (const auto& m : before) {
          if (m.attribute == a) {
            EXPECT_NE(std::find(after.begin(), after.end(), m), after.end());
          }
        }
      }
      ++checked;
    }
  }
  EXPECT_GT(checked, 500u);
}

}  // namespace
}  // namespace cpo
