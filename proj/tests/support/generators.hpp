#pragma once

// Seeded generators for property tests.

#include <algorithm>
#include <string>
#include <vector>

#include "cpo/concept_graph.hpp"
#include "cpo/counterfactual.hpp"
#include "cpo/policy.hpp"
#include "cpo/rng.hpp"
#include "cpo/trajectory.hpp"

namespace cpo::testing {

struct GraphShape {
  std::size_t min_entities = 2;
  std::size_t max_entities = 7;
  std::size_t min_attributes = 3;
  std::size_t max_attributes = 14;
  double exclusion_rate = 0.25;
  double association_rate = 0.3;
  double exclusion_relation_rate = 0.2;
};

inline std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + rng.below(hi - lo + 1);
}

/// Entities "d<i>"; attributes are one or two words, all words distinct, so
/// phrase extraction is unambiguous. Associations that would contradict an
/// entity exclusion are dropped, so the result always validates.
inline ConceptGraph random_graph(Rng& rng, const GraphShape& shape = {}) {
  ConceptGraph graph;
  const std::size_t entities = between(rng, shape.min_entities, shape.max_entities);
  const std::size_t attributes = between(rng, shape.min_attributes, shape.max_attributes);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < entities; ++i) {
    names.push_back("d" + std::to_string(i));
    graph.add_entity(names.back());
  }
  std::vector<std::string> attrs;
  for (std::size_t i = 0; i < attributes; ++i) {
    std::string name = "w" + std::to_string(i);
    if (rng.bernoulli(0.4)) name += " x" + std::to_string(i);
    attrs.push_back(name);
    graph.add_attribute(name, static_cast<AttributeCategory>(rng.below(4)));
  }
  for (std::size_t a = 0; a < entities; ++a) {
    for (std::size_t b = a + 1; b < entities; ++b) {
      if (rng.bernoulli(shape.exclusion_rate)) graph.add_exclusion(names[a], names[b]);
    }
  }
  for (const auto& e : names) {
    for (const auto& attr : attrs) {
      const double u = rng.uniform();
      if (u < shape.association_rate) {
        graph.set_relation(e, attr, RelationKind::kAssociation);
      } else if (u < shape.association_rate + shape.exclusion_relation_rate) {
        graph.set_relation(e, attr, RelationKind::kExclusion);
      }
    }
  }
  for (const auto& [a, b] : graph.exclusions()) {
    if (a > b) continue;
    for (const auto& attr : graph.associated_attributes(a)) {
      if (graph.relation_of(b, attr) == RelationKind::kAssociation) {
        graph.set_relation(b, attr, RelationKind::kIrrelevance);
      }
    }
  }
  return graph;
}

/// Distinct attributes in random order with random polarity.
inline Findings random_findings(Rng& rng, const ConceptGraph& graph, std::size_t max_count = 6) {
  std::vector<std::string> pool;
  for (const auto& [name, attr] : graph.attributes()) pool.push_back(name);
  rng.shuffle(pool);
  const std::size_t count = std::min(pool.size(), rng.below(max_count + 1));
  Findings out;
  for (std::size_t i = 0; i < count; ++i) out.push_back({pool[i], rng.bernoulli(0.7)});
  return out;
}

inline std::string random_entity(Rng& rng, const ConceptGraph& graph) {
  const std::vector<std::string> all(graph.entities().begin(), graph.entities().end());
  return all[rng.below(all.size())];
}

/// Plausible factual: the source's associated attributes present, some of
/// its excluded ones negated, everything in canonical order.
inline Trajectory random_factual(Rng& rng, const ConceptGraph& graph, const Vocab& vocab,
                                 const std::string& source, TokenSeq context = {}) {
  Findings findings;
  for (const auto& a : graph.associated_attributes(source)) {
    if (rng.bernoulli(0.7)) findings.push_back({a, true});
  }
  for (const auto& a : graph.excluded_attributes(source)) {
    if (rng.bernoulli(0.3)) findings.push_back({a, false});
  }
  canonical_sort(graph, findings);
  return render_trajectory(findings, source, vocab, std::move(context));
}

/// A few random words of the vocabulary, excluding specials and labels.
inline TokenSeq random_context(Rng& rng, const Vocab& vocab, std::size_t max_length = 4) {
  std::vector<TokenId> words;
  for (TokenId t = 0; t < vocab.size(); ++t) {
    if (!vocab.is_special(t) && !vocab.is_label(t)) words.push_back(t);
  }
  TokenSeq out;
  const std::size_t n = 1 + rng.below(max_length);
  for (std::size_t i = 0; i < n; ++i) out.push_back(words[rng.below(words.size())]);
  return out;
}

/// Small policy with logits spread wide enough that distributions are far
/// from uniform.
inline PolicyHyper tiny_hyper() { return PolicyHyper{3, 4, 5}; }

inline PolicyParams random_policy(const Vocab& vocab, std::uint64_t seed,
                                  const PolicyHyper& hyper = tiny_hyper(), double scale = 0.5) {
  return init_policy(vocab.size(), hyper, seed, scale);
}

/// A valid pair on a random graph with a random context.
struct PairCase {
  ConceptGraph graph;
  Vocab vocab;
  PreferencePair pair;
};

inline PairCase random_pair_case(std::uint64_t seed) {
  Rng rng(seed);
  for (;;) {
    ConceptGraph graph = random_graph(rng);
    Vocab vocab = Vocab::from_graph(graph);
    const std::string source = random_entity(rng, graph);
    const auto targets = valid_targets(graph, source);
    if (targets.empty()) continue;
    const std::string target = targets[rng.below(targets.size())];
    const Lexicon lexicon(graph, vocab);
    const Trajectory factual =
        random_factual(rng, graph, vocab, source, random_context(rng, vocab));
    PreferencePair pair = generate_pair(graph, lexicon, vocab, factual, target, rng.next());
    return {std::move(graph), std::move(vocab), std::move(pair)};
  }
}

}  // namespace cpo::testing
