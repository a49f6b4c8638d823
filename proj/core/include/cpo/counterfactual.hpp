#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpo/concept_graph.hpp"
#include "cpo/trajectory.hpp"

namespace cpo {

/// Controlled perturbation that turns a factual chain into one supporting
/// `flip_answer`. Attribute lists are sorted.
struct PerturbationPlan {
  std::vector<std::string> keep;
  std::vector<std::string> insert;
  std::vector<std::string> negate_or_remove;
  std::string flip_answer;

  friend bool operator==(const PerturbationPlan&, const PerturbationPlan&) = default;
};

/// Target-associated attributes that the factual report explicitly negates
/// are always inserted; further target-associated attributes absent from the
/// report are added up to a seeded count in [1, #candidates].
PerturbationPlan plan_perturbation(const ConceptGraph& graph, const Lexicon& lexicon,
                                   const Trajectory& factual, const std::string& target,
                                   std::uint64_t seed);

/// Inserted attributes replace an existing negated mention in place and
/// otherwise land at their canonical-order position. Excluded attributes are
/// negated in place and every other mention is copied verbatim.
Trajectory apply_plan(const PerturbationPlan& plan, const Trajectory& factual,
                      const Lexicon& lexicon, const Vocab& vocab);

PreferencePair generate_pair(const ConceptGraph& graph, const Lexicon& lexicon, const Vocab& vocab,
                             const Trajectory& factual, const std::string& target,
                             std::uint64_t seed);

/// Every declared entity other than the source that is not mutually exclusive
/// with it, in lexicographic order.
std::vector<std::string> valid_targets(const ConceptGraph& graph, const std::string& source);

/// One pair per (factual, valid target); the seed of record i is
/// mix_seed(seed, i) and targets are visited in lexicographic order.
std::vector<PreferencePair> generate_pairs(const ConceptGraph& graph, const Vocab& vocab,
                                           const std::vector<Trajectory>& factuals,
                                           std::uint64_t seed);

}  // namespace cpo
