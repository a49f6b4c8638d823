#include "cpo/drift.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cpo/error.hpp"
#include "cpo/rng.hpp"

namespace cpo {
namespace {

void require_same_size(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw Error(ErrorCode::kShapeMismatch, "distributions differ in length");
  }
}

void require_prefix(const Vocab& vocab, std::span<const TokenId> prefix) {
  if (prefix.empty() || prefix.front() != vocab.think()) {
    throw Error(ErrorCode::kBadPrefix, "prefix must start with <think>");
  }
  for (std::size_t i = 1; i < prefix.size(); ++i) {
    if (vocab.is_special(prefix[i])) {
      throw Error(ErrorCode::kBadPrefix, "delimiter inside thinking prefix at position " +
                                             std::to_string(i));
    }
  }
}

std::vector<double> exact_outcome(const PolicyParams& policy, const Vocab& vocab,
                                  const TokenSeq& context, std::span<const TokenId> prefix) {
  TokenSeq history = context;
  history.insert(history.end(), prefix.begin(), prefix.end());
  history.push_back(vocab.end_think());
  const auto scores = logits(policy, window_of(history, policy.hyper().context_window));
  std::vector<double> label_scores;
  label_scores.reserve(vocab.labels().size());
  for (TokenId l : vocab.labels()) label_scores.push_back(scores[l]);
  auto z = log_softmax(label_scores);
  for (double& x : z) x = std::exp(x);
  return z;
}

}  // namespace

std::size_t DriftReport::flag_count() const {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(), [](const DriftStep& s) { return s.flagged; }));
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  require_same_size(p, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
  return 0.5 * sum;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require_same_size(p, q);
  const double n = static_cast<double>(p.size());
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sp += p[i];
    sq += q[i];
  }
  sp += n * kKlEpsilon;
  sq += n * kKlEpsilon;
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = (p[i] + kKlEpsilon) / sp;
    const double b = (q[i] + kKlEpsilon) / sq;
    kl += a * std::log(a / b);
  }
  return std::max(kl, 0.0);
}

std::vector<double> latent_outcome(const PolicyParams& policy, const Vocab& vocab,
                                   const TokenSeq& context, std::span<const TokenId> prefix,
                                   const OutcomeEstimator& estimator) {
  require_prefix(vocab, prefix);
  if (policy.vocab_size() != vocab.size()) {
    throw Error(ErrorCode::kVocabMismatch, "policy vocabulary does not match");
  }
  if (estimator.mode == OutcomeEstimator::Mode::kExact) {
    return exact_outcome(policy, vocab, context, prefix);
  }
  if (estimator.rollouts == 0) throw Error(ErrorCode::kConfig, "rollout count must be positive");
  const std::size_t labels = vocab.labels().size();
  std::vector<double> counts(labels, 0.0);
  for (std::size_t r = 0; r < estimator.rollouts; ++r) {
    SampleOptions options;
    options.seed = mix_seed(estimator.seed, r);
    const auto t = continue_from(policy, vocab, context, prefix, options);
    counts[vocab.label_index(t.answer)] += 1.0;
  }
  const double n = static_cast<double>(estimator.rollouts);
  const double pseudo = 1.0 / n;
  const double total = n + pseudo * static_cast<double>(labels);
  for (double& c : counts) c = (c + pseudo) / total;
  return counts;
}

ThinkingStream build_stream(const PolicyParams& policy, const Vocab& vocab,
                            const Trajectory& trajectory, const OutcomeEstimator& estimator) {
  ThinkingStream stream;
  stream.estimator = estimator;
  TokenSeq prefix = {vocab.think()};
  stream.states.push_back({prefix, latent_outcome(policy, vocab, trajectory.context, prefix,
                                                  estimator)});
  TokenSeq history = trajectory.context;
  history.push_back(vocab.think());
  for (TokenId token : trajectory.thinking) {
    const TokenId target[] = {token};
    stream.token_logprob.push_back(sequence_logprob(policy, history, target));
    history.push_back(token);
    prefix.push_back(token);
    stream.states.push_back(
        {prefix, latent_outcome(policy, vocab, trajectory.context, prefix, estimator)});
  }
  return stream;
}

DriftReport detect_drift(const ThinkingStream& stream, double threshold_tv) {
  if (stream.states.empty()) throw Error(ErrorCode::kEmptyInput, "empty thinking stream");
  DriftReport report;
  report.threshold = threshold_tv;
  if (stream.estimator.mode == OutcomeEstimator::Mode::kRollout) {
    report.estimator = "rollout";
    report.rollouts = stream.estimator.rollouts;
  }
  for (std::size_t j = 0; j + 1 < stream.states.size(); ++j) {
    DriftStep step;
    step.position = j;
    step.tv = total_variation(stream.states[j].z, stream.states[j + 1].z);
    step.kl = kl_divergence(stream.states[j].z, stream.states[j + 1].z);
    step.token_logprob = j < stream.token_logprob.size() ? stream.token_logprob[j] : 0.0;
    step.flagged = step.tv > threshold_tv;
    report.steps.push_back(step);
  }
  return report;
}

std::string drift_trace_csv(const DriftReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "position,tv,kl,token_logprob,flagged\n";
  for (const auto& s : report.steps) {
    out << s.position << ',' << s.tv << ',' << s.kl << ',' << s.token_logprob << ','
        << (s.flagged ? 1 : 0) << '\n';
  }
  return out.str();
}

OutcomeFunctional label_mass(std::size_t label_index) {
  return [label_index](std::span<const double> z) {
    if (label_index >= z.size()) {
      throw Error(ErrorCode::kShapeMismatch, "label index outside outcome distribution");
    }
    return z[label_index];
  };
}

double causal_effect(const PolicyRegistry& registry, const std::string& regime, const Vocab& vocab,
                     const Trajectory& t, const Trajectory& t_prime,
                     const OutcomeFunctional& expectation, const OutcomeEstimator& estimator) {
  auto it = registry.find(regime);
  if (it == registry.end()) throw Error(ErrorCode::kRegimeUnknown, regime);
  if (t.context != t_prime.context) {
    throw Error(ErrorCode::kContextMismatch, "interventions must share the context");
  }
  auto forced = [&](const Trajectory& mediator) {
    TokenSeq prefix = {vocab.think()};
    prefix.insert(prefix.end(), mediator.thinking.begin(), mediator.thinking.end());
    return latent_outcome(it->second, vocab, mediator.context, prefix, estimator);
  };
  return expectation(forced(t)) - expectation(forced(t_prime));
}

}  // namespace cpo
