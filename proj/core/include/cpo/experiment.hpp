#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpo/corpus.hpp"
#include "cpo/metrics.hpp"
#include "cpo/objective.hpp"
#include "cpo/policy.hpp"

namespace cpo {

/// Default SFT stage: CpoConfig defaults with the larger SFT learning rate.
inline CpoConfig sft_stage() {
  CpoConfig config;
  config.learning_rate = 1e-2;
  return config;
}

/// SFT-only versus SFT-then-CPO on one seeded synthetic world.
struct AblationConfig {
  WorldSpec world = demo_world_spec();
  std::size_t train_size = 2000;
  std::size_t eval_size = 2000;
  PolicyHyper hyper;
  CpoConfig sft = sft_stage();
  CpoConfig cpo;
};

struct AblationResult {
  std::uint64_t seed = 0;
  EvalReport sft;
  EvalReport cpo;
  double sft_confusable = 0.0;
  double cpo_confusable = 0.0;
  std::size_t pair_count = 0;

  double improvement() const { return cpo_confusable - sft_confusable; }
};

/// Demo world, fresh held-out split, SFT from a seeded init, counterfactual
/// pairs over the training split, then CPO against the frozen SFT policy.
AblationResult run_ablation(const AblationConfig& config, std::uint64_t seed);

/// One pair per record whose factual has a valid target. The target is drawn
/// from the record regime's label marginals restricted to valid targets, so
/// each entity is rejected about as often as it is preferred.
std::vector<PreferencePair> pairs_for(const WorldSpec& spec, const Vocab& vocab,
                                      const std::vector<SampleRecord>& records,
                                      std::uint64_t seed);

/// Demo world where every associated attribute is both reported and cued in
/// the observation, so the answer is fixed by the input and a stationary
/// report leaves z nothing to learn mid-stream.
WorldSpec drift_benchmark_world();

/// Injected-shift monitoring benchmark. A stationary stream is the policy's
/// own greedy report for a fresh observation; its shifted twin keeps the
/// first half of those findings and splices in the second half of a report
/// whose latent entity differs. Both are scored with the same seeded rollout
/// estimator. A stream counts as flagged when any step exceeds the threshold.
/// Observations whose greedy report stops mid-phrase are redrawn. The policy
/// window spans a whole demo report.
struct DriftBenchmarkConfig {
  WorldSpec world = drift_benchmark_world();
  std::size_t trials = 100;
  double threshold = 0.2;
  std::size_t rollouts = 128;
  std::size_t train_size = 2000;
  PolicyHyper hyper{16, 16, 64};
  CpoConfig sft = sft_stage();
};

struct DriftBenchmarkResult {
  std::size_t trials = 0;
  std::size_t stationary_flagged = 0;
  std::size_t shifted_flagged = 0;
  std::size_t stationary_flag_total = 0;
  std::size_t shifted_flag_total = 0;

  double true_positive_rate() const;
  double false_positive_rate() const;
};

/// Keeps the first half of `base`'s findings and appends the second half of
/// `other`'s, answering with `other`'s label. Context stays `base`'s.
Trajectory splice_findings(const Trajectory& base, const Trajectory& other, const Lexicon& lexicon);

DriftBenchmarkResult run_drift_benchmark(const DriftBenchmarkConfig& config, std::uint64_t seed);

/// Same benchmark against an already trained policy.
DriftBenchmarkResult run_drift_benchmark(const PolicyParams& policy, const WorldSpec& spec,
                                         const Vocab& vocab, const DriftBenchmarkConfig& config,
                                         std::uint64_t seed);

}  // namespace cpo
