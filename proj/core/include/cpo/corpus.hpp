#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpo/concept_graph.hpp"
#include "cpo/trajectory.hpp"

namespace cpo {

/// Synthetic symbolic-diagnosis environment. A record draws a latent entity
/// from the regime's label marginals, renders findings from the entity's
/// associated attributes, and emits an observation of noisy cue tokens
/// ("v:<attribute>") padded with "v:none".
struct WorldSpec {
  ConceptGraph graph;
  /// One probability vector per regime, indexed like graph.entities().
  std::vector<std::vector<double>> label_marginals;
  /// Probability of one spurious (irrelevant) attribute mention.
  double attribute_noise = 0.05;
  std::size_t observation_length = 6;
  /// Probability that a second, non-exclusive entity contributes one finding.
  double comorbidity_rate = 0.0;
  /// Probability that each associated attribute of the latent entity is present.
  double mention_rate = 0.75;
  /// Probability that each excluded attribute is mentioned as absent.
  double negation_rate = 0.25;
  /// Probability that a present attribute shows up as an observation cue.
  double cue_rate = 0.7;
  std::vector<std::string> prompt = {"report"};
};

struct SampleRecord {
  TokenSeq observation;
  TokenSeq prompt;
  Trajectory trajectory;  // context = observation ++ prompt
  int regime = 0;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

/// Throws kSpec on unnormalised marginals, probabilities outside [0, 1],
/// a zero observation length or an empty prompt.
void check_world(const WorldSpec& spec);

/// Word vocabulary of the graph plus cue, filler and prompt tokens.
Vocab world_vocab(const WorldSpec& spec);
std::string cue_token(const std::string& attribute);

/// p_i proportional to 1 / (i + 1)^s.
std::vector<double> zipf_marginals(std::size_t n, double s);

/// `count` regimes starting from `base`; each successive regime moves
/// exactly `tv` of probability mass from its largest to its smallest entry,
/// so consecutive regimes are exactly `tv` apart in total variation.
std::vector<std::vector<double>> shifted_regimes(const std::vector<double>& base,
                                                 std::size_t count, double tv);

/// `n` records of one regime; record i is seeded with mix_seed(seed, i).
std::vector<SampleRecord> generate_regime(const WorldSpec& spec, int regime, std::size_t n,
                                          std::uint64_t seed);

/// `n` records split into contiguous, near-equal blocks, one per regime.
std::vector<SampleRecord> generate_world(const WorldSpec& spec, std::size_t n,
                                         std::uint64_t seed);

/// Eight demo entities with Zipf(1.2) marginals; consolidation and pneumonia
/// form the confusable pair.
WorldSpec demo_world_spec(std::size_t regimes = 1, double shift_tv = 0.0);
std::vector<std::string> demo_world_entities();
std::vector<std::string> confusable_entities();

/// JSON-lines persistence. Loading validates every line and throws
/// SchemaError with the 1-based line number.
void save_samples(const std::vector<SampleRecord>& records, const Vocab& vocab,
                  const std::string& path);
std::vector<SampleRecord> load_samples(const std::string& path, const Vocab& vocab);

void save_pairs(const std::vector<PreferencePair>& pairs, const Vocab& vocab,
                const std::string& path);
std::vector<PreferencePair> load_pairs(const std::string& path, const Vocab& vocab);

std::string samples_jsonl(const std::vector<SampleRecord>& records, const Vocab& vocab);
std::string pairs_jsonl(const std::vector<PreferencePair>& pairs, const Vocab& vocab);

}  // namespace cpo
