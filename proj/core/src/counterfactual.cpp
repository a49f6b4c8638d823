#include "cpo/counterfactual.hpp"

#include <algorithm>
#include <set>

#include "cpo/error.hpp"
#include "cpo/rng.hpp"

namespace cpo {

PerturbationPlan plan_perturbation(const ConceptGraph& graph, const Lexicon& lexicon,
                                   const Trajectory& factual, const std::string& target,
                                   std::uint64_t seed) {
  if (!graph.has_entity(target)) throw Error(ErrorCode::kUnknownEntity, target);
  const Vocab& vocab = lexicon.vocab();
  const std::string& source = vocab.text(factual.answer);
  if (!graph.has_entity(source)) throw Error(ErrorCode::kUnknownEntity, source);
  if (source == target) {
    throw Error(ErrorCode::kDegenerateTarget, "counterfactual target equals source " + source);
  }

  const Findings findings = lexicon.extract(factual.thinking);
  std::set<std::string> present, negated, mentioned;
  for (const auto& m : findings) {
    (m.present ? present : negated).insert(m.attribute);
    mentioned.insert(m.attribute);
  }

  PerturbationPlan plan;
  plan.flip_answer = target;

  std::vector<std::string> mandatory, optional;
  for (const auto& a : graph.associated_attributes(target)) {
    if (present.contains(a)) continue;
    (negated.contains(a) ? mandatory : optional).push_back(a);
  }
  const std::size_t candidates = mandatory.size() + optional.size();
  if (candidates > 0) {
    Rng rng(seed);
    const std::size_t low = std::max<std::size_t>(1, mandatory.size());
    const std::size_t count = low + rng.below(candidates - low + 1);
    rng.shuffle(optional);
    plan.insert = mandatory;
    plan.insert.insert(plan.insert.end(), optional.begin(),
                       optional.begin() + static_cast<std::ptrdiff_t>(count - mandatory.size()));
    std::sort(plan.insert.begin(), plan.insert.end());
  }

  for (const auto& a : graph.excluded_attributes(target)) {
    if (present.contains(a)) plan.negate_or_remove.push_back(a);
  }
  for (const auto& a : mentioned) {
    if (graph.relation_of(source, a) == RelationKind::kIrrelevance &&
        graph.relation_of(target, a) == RelationKind::kIrrelevance) {
      plan.keep.push_back(a);
    }
  }
  return plan;
}

Trajectory apply_plan(const PerturbationPlan& plan, const Trajectory& factual,
                      const Lexicon& lexicon, const Vocab& vocab) {
  auto contains = [](const std::vector<std::string>& v, const std::string& a) {
    return std::binary_search(v.begin(), v.end(), a);
  };
  std::set<std::string> placed;
  Findings out;
  for (const auto& m : lexicon.extract(factual.thinking)) {
    if (contains(plan.insert, m.attribute)) {
      out.push_back({m.attribute, true});
      placed.insert(m.attribute);
    } else if (contains(plan.negate_or_remove, m.attribute)) {
      out.push_back({m.attribute, false});
    } else {
      out.push_back(m);
    }
  }
  // Remaining inserts go where a canonically ordered report would hold them;
  // an out-of-order factual keeps its own order.
  for (const auto& a : plan.insert) {
    if (placed.contains(a)) continue;
    const Mention m{a, true};
    auto at = std::find_if(out.begin(), out.end(), [&](const Mention& existing) {
      return canonical_before(lexicon.graph(), m, existing);
    });
    out.insert(at, m);
  }

  Trajectory t;
  t.context = factual.context;
  t.thinking = lexicon.render(out);
  t.answer = vocab.label_of(plan.flip_answer);
  return t;
}

PreferencePair generate_pair(const ConceptGraph& graph, const Lexicon& lexicon, const Vocab& vocab,
                             const Trajectory& factual, const std::string& target,
                             std::uint64_t seed) {
  const auto plan = plan_perturbation(graph, lexicon, factual, target, seed);
  PreferencePair pair;
  pair.preferred = factual;
  pair.counterfactual = apply_plan(plan, factual, lexicon, vocab);
  pair.source_entity = vocab.text(factual.answer);
  pair.target_entity = target;
  return pair;
}

std::vector<std::string> valid_targets(const ConceptGraph& graph, const std::string& source) {
  if (!graph.has_entity(source)) throw Error(ErrorCode::kUnknownEntity, source);
  std::vector<std::string> out;
  for (const auto& e : graph.entities()) {
    if (e != source && !graph.entities_exclusive(source, e)) out.push_back(e);
  }
  return out;
}

std::vector<PreferencePair> generate_pairs(const ConceptGraph& graph, const Vocab& vocab,
                                           const std::vector<Trajectory>& factuals,
                                           std::uint64_t seed) {
  const Lexicon lexicon(graph, vocab);
  std::vector<PreferencePair> pairs;
  for (std::size_t i = 0; i < factuals.size(); ++i) {
    const std::uint64_t record_seed = mix_seed(seed, i);
    const auto targets = valid_targets(graph, vocab.text(factuals[i].answer));
    for (std::size_t j = 0; j < targets.size(); ++j) {
      pairs.push_back(
          generate_pair(graph, lexicon, vocab, factuals[i], targets[j], mix_seed(record_seed, j)));
    }
  }
  return pairs;
}

}  // namespace cpo
