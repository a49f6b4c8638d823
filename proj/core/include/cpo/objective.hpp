#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpo/policy.hpp"
#include "cpo/trajectory.hpp"

namespace cpo {

struct LossReport {
  double loss = 0.0;
  double margin = 0.0;       // beta * (log-ratio(t+) - log-ratio(t-)), the sigmoid argument
  double reward_diff = 0.0;  // implicit reward difference; equals margin
  double grad_norm = 0.0;
};

/// -log sigmoid(x), stable for large |x|.
double neg_log_sigmoid(double x);
double sigmoid(double x);

/// Preference loss of one pair against the frozen reference policy.
LossReport cpo_loss(const PolicyParams& theta, const PolicyParams& ref, const PreferencePair& pair,
                    const Vocab& vocab, double beta);

/// Batch mean of the per-pair loss, margin and reward difference.
LossReport cpo_loss(const PolicyParams& theta, const PolicyParams& ref,
                    std::span<const PreferencePair> batch, const Vocab& vocab, double beta);

double implicit_reward_diff(const PolicyParams& theta, const PolicyParams& ref,
                            const PreferencePair& pair, const Vocab& vocab, double beta);

struct GradientResult {
  PolicyGradient gradient;
  LossReport report;
};

/// Exact gradient of the batch-mean preference loss with respect to theta.
/// Pairs are reduced in index order.
GradientResult cpo_grad(const PolicyParams& theta, const PolicyParams& ref,
                        std::span<const PreferencePair> batch, const Vocab& vocab, double beta);

/// Variant taking precomputed reference log-probabilities, (t+, t-) per pair.
GradientResult cpo_grad(const PolicyParams& theta, std::span<const PreferencePair> batch,
                        std::span<const std::pair<double, double>> ref_logprobs,
                        const Vocab& vocab, double beta);

/// Mean negative log-likelihood per scored token of the trajectory body.
double sft_loss(const PolicyParams& theta, const Trajectory& trajectory, const Vocab& vocab);
double sft_loss(const PolicyParams& theta, std::span<const Trajectory> batch, const Vocab& vocab);
GradientResult sft_grad(const PolicyParams& theta, std::span<const Trajectory> batch,
                        const Vocab& vocab);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-8;
  double weight_decay = 0.05;  // decoupled
};

class Adam {
 public:
  Adam(std::size_t size, AdamConfig config);

  void step(std::span<double> params, std::span<const double> grad, double learning_rate);

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

enum class TrainMode { kSft, kCpo };
std::string_view to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view text);

/// Steps [begin, end) draw minibatches from corpus segment `regime`.
struct RegimeSpan {
  int regime = 0;
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const RegimeSpan&, const RegimeSpan&) = default;
};

struct CpoConfig {
  double beta = 0.1;
  double learning_rate = 1e-3;
  std::size_t steps = 500;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  /// Empty means segment 0 for every step.
  std::vector<RegimeSpan> regime_schedule;
  AdamConfig adam;
};

/// Throws kConfig unless beta > 0, learning_rate > 0, batch_size > 0 and the
/// schedule spans are contiguous from step 0 in order.
void check_config(const CpoConfig& config);

/// JSON document with the CpoConfig field names; absent fields keep defaults.
CpoConfig parse_config(std::string_view document, CpoConfig defaults = {});
CpoConfig load_config(const std::string& path, CpoConfig defaults = {});
std::string serialize_config(const CpoConfig& config);

/// Corpus segments keyed by regime id.
struct TrainingData {
  std::map<int, std::vector<Trajectory>> trajectories;
  std::map<int, std::vector<PreferencePair>> pairs;
};

struct StepRecord {
  std::size_t step = 0;
  TrainMode mode = TrainMode::kSft;
  LossReport report;
  int regime = 0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<StepRecord> log;
};

/// Seeded minibatch Adam over the regime schedule. Minibatches are drawn
/// uniformly with replacement from the active segment. `ref` is required in
/// kCpo mode and never modified. Throws kScheduleExhausted when a step has no
/// non-empty segment and kNonFiniteLoss on a non-finite loss or gradient.
TrainResult train(const PolicyParams& theta0, const PolicyParams* ref, const TrainingData& data,
                  const CpoConfig& config, TrainMode mode, const Vocab& vocab);

/// CSV: step,mode,loss,margin,reward_diff,grad_norm,regime_id
std::string metric_log_csv(const std::vector<StepRecord>& log);

}  // namespace cpo
