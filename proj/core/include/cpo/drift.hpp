#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cpo/policy.hpp"
#include "cpo/trajectory.hpp"

namespace cpo {

/// Smoothing added to both distributions before KL so it stays finite.
inline constexpr double kKlEpsilon = 1e-9;

struct CognitiveState {
  TokenSeq prefix;        // starts with <think>
  std::vector<double> z;  // distribution over answer labels, vocab label order
};

struct OutcomeEstimator {
  enum class Mode { kExact, kRollout };
  Mode mode = Mode::kExact;
  std::size_t rollouts = 0;
  std::uint64_t seed = 0;

  static OutcomeEstimator exact() { return {}; }
  static OutcomeEstimator rollout(std::size_t n, std::uint64_t seed) {
    return {Mode::kRollout, n, seed};
  }
};

struct ThinkingStream {
  std::vector<CognitiveState> states;
  /// log pi(t_j | context, prefix_j) for each appended thinking token;
  /// one entry per transition, so states.size() - 1 entries.
  std::vector<double> token_logprob;
  OutcomeEstimator estimator;
};

struct DriftStep {
  std::size_t position = 0;  // transition from state j to j + 1
  double tv = 0.0;
  double kl = 0.0;
  double token_logprob = 0.0;
  bool flagged = false;
};

struct DriftReport {
  std::vector<DriftStep> steps;
  double threshold = 0.0;
  std::string estimator = "exact";
  std::size_t rollouts = 0;

  std::size_t flag_count() const;
  bool any_flagged() const { return flag_count() > 0; }
};

double total_variation(std::span<const double> p, std::span<const double> q);
/// KL(p || q) after add-kKlEpsilon smoothing and renormalisation.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Latent outcome distribution z at a thinking prefix. Exact mode forces
/// </think> and reads the softmax restricted to answer labels; rollout mode
/// samples N continuations and returns answer frequencies with 1/N pseudo
/// counts. Throws kBadPrefix unless `prefix` starts with <think> and holds no
/// other delimiter.
std::vector<double> latent_outcome(const PolicyParams& policy, const Vocab& vocab,
                                   const TokenSeq& context, std::span<const TokenId> prefix,
                                   const OutcomeEstimator& estimator = OutcomeEstimator::exact());

/// One state per thinking position, from the bare <think> prefix to the full
/// thinking segment.
ThinkingStream build_stream(const PolicyParams& policy, const Vocab& vocab,
                            const Trajectory& trajectory,
                            const OutcomeEstimator& estimator = OutcomeEstimator::exact());

DriftReport detect_drift(const ThinkingStream& stream, double threshold_tv);

/// CSV: position,tv,kl,token_logprob,flagged
std::string drift_trace_csv(const DriftReport& report);

/// Policy checkpoints keyed by training regime; the regime plays the role of
/// the confounder held fixed during an intervention.
using PolicyRegistry = std::map<std::string, PolicyParams>;

/// Maps an outcome distribution to a scalar.
using OutcomeFunctional = std::function<double(std::span<const double>)>;
OutcomeFunctional label_mass(std::size_t label_index);

/// Paired interventional contrast: f(z | thinking forced to t) minus
/// f(z | thinking forced to t_prime) under the checkpoint of `regime`, with
/// both outcomes read at the end of the forced thinking. Rollout estimates
/// reuse one seed for both arms.
double causal_effect(const PolicyRegistry& registry, const std::string& regime, const Vocab& vocab,
                     const Trajectory& t, const Trajectory& t_prime,
                     const OutcomeFunctional& expectation,
                     const OutcomeEstimator& estimator = OutcomeEstimator::exact());

}  // namespace cpo
