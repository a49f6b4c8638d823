#include "cpo/objective.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cpo/error.hpp"
#include "cpo/rng.hpp"
#include "json.hpp"

namespace cpo {
namespace {

using nlohmann::json;

void require_shared_vocab(const PolicyParams& theta, const PolicyParams& ref, const Vocab& vocab) {
  if (theta.vocab_size() != vocab.size() || ref.vocab_size() != vocab.size()) {
    throw Error(ErrorCode::kVocabMismatch, "policy and reference must share the vocabulary");
  }
  if (!theta.same_shape(ref)) {
    throw Error(ErrorCode::kShapeMismatch, "policy and reference differ in shape");
  }
}

void require_beta(double beta) {
  if (!(beta > 0.0)) throw Error(ErrorCode::kConfig, "beta must be positive");
}

TokenSeq scored_prefix(const Trajectory& t, const Vocab& vocab) {
  TokenSeq prefix = t.context;
  prefix.push_back(vocab.think());
  return prefix;
}

LossReport report_from_margin(double margin) {
  LossReport r;
  r.margin = margin;
  r.reward_diff = margin;
  r.loss = neg_log_sigmoid(margin);
  return r;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

double neg_log_sigmoid(double x) {
  // log(1 + e^-x) without overflow on either side.
  return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

LossReport cpo_loss(const PolicyParams& theta, const PolicyParams& ref, const PreferencePair& pair,
                    const Vocab& vocab, double beta) {
  return report_from_margin(implicit_reward_diff(theta, ref, pair, vocab, beta));
}

LossReport cpo_loss(const PolicyParams& theta, const PolicyParams& ref,
                    std::span<const PreferencePair> batch, const Vocab& vocab, double beta) {
  LossReport mean;
  if (batch.empty()) return mean;
  for (const auto& pair : batch) {
    const auto r = cpo_loss(theta, ref, pair, vocab, beta);
    mean.loss += r.loss;
    mean.margin += r.margin;
  }
  const double n = static_cast<double>(batch.size());
  mean.loss /= n;
  mean.margin /= n;
  mean.reward_diff = mean.margin;
  return mean;
}

double implicit_reward_diff(const PolicyParams& theta, const PolicyParams& ref,
                            const PreferencePair& pair, const Vocab& vocab, double beta) {
  require_shared_vocab(theta, ref, vocab);
  require_beta(beta);
  const double preferred = sequence_logprob(theta, pair.preferred, vocab) -
                           sequence_logprob(ref, pair.preferred, vocab);
  const double counterfactual = sequence_logprob(theta, pair.counterfactual, vocab) -
                                sequence_logprob(ref, pair.counterfactual, vocab);
  return beta * (preferred - counterfactual);
}

GradientResult cpo_grad(const PolicyParams& theta, const PolicyParams& ref,
                        std::span<const PreferencePair> batch, const Vocab& vocab, double beta) {
  require_shared_vocab(theta, ref, vocab);
  std::vector<std::pair<double, double>> ref_logprobs;
  ref_logprobs.reserve(batch.size());
  for (const auto& pair : batch) {
    ref_logprobs.emplace_back(sequence_logprob(ref, pair.preferred, vocab),
                              sequence_logprob(ref, pair.counterfactual, vocab));
  }
  return cpo_grad(theta, batch, ref_logprobs, vocab, beta);
}

GradientResult cpo_grad(const PolicyParams& theta, std::span<const PreferencePair> batch,
                        std::span<const std::pair<double, double>> ref_logprobs,
                        const Vocab& vocab, double beta) {
  require_beta(beta);
  if (theta.vocab_size() != vocab.size()) {
    throw Error(ErrorCode::kVocabMismatch, "policy vocabulary does not match");
  }
  if (ref_logprobs.size() != batch.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one reference log-probability pair per batch entry");
  }
  GradientResult out{PolicyGradient(theta.vocab_size(), theta.hyper()), {}};
  if (batch.empty()) return out;
  const double n = static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& pair = batch[i];
    const TokenSeq pos_body = pair.preferred.body(vocab);
    const TokenSeq neg_body = pair.counterfactual.body(vocab);
    const auto pos = score_sequence(theta, scored_prefix(pair.preferred, vocab), pos_body);
    const auto neg = score_sequence(theta, scored_prefix(pair.counterfactual, vocab), neg_body);
    const double margin =
        beta * ((pos.logprob - ref_logprobs[i].first) - (neg.logprob - ref_logprobs[i].second));
    out.report.loss += neg_log_sigmoid(margin) / n;
    out.report.margin += margin / n;
    // d(-log sigmoid(m))/dm = -sigmoid(-m); dm/dlogpi(t+) = beta.
    const double upstream = -beta * sigmoid(-margin) / n;
    // Positions before the bodies diverge see identical windows and targets in
    // both trajectories, so their contributions cancel exactly.
    const std::size_t shared =
        std::mismatch(pos_body.begin(), pos_body.end(), neg_body.begin(), neg_body.end()).first -
        pos_body.begin();
    backward_scored(theta, pos, upstream, out.gradient, shared);
    backward_scored(theta, neg, -upstream, out.gradient, shared);
  }
  out.report.reward_diff = out.report.margin;
  out.report.grad_norm = l2_norm(out.gradient.flat());
  return out;
}

double sft_loss(const PolicyParams& theta, const Trajectory& trajectory, const Vocab& vocab) {
  if (theta.vocab_size() != vocab.size()) {
    throw Error(ErrorCode::kVocabMismatch, "policy vocabulary does not match");
  }
  const TokenSeq body = trajectory.body(vocab);
  if (body.empty()) return 0.0;
  return -sequence_logprob(theta, scored_prefix(trajectory, vocab), body) /
         static_cast<double>(body.size());
}

double sft_loss(const PolicyParams& theta, std::span<const Trajectory> batch, const Vocab& vocab) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& t : batch) total += sft_loss(theta, t, vocab);
  return total / static_cast<double>(batch.size());
}

GradientResult sft_grad(const PolicyParams& theta, std::span<const Trajectory> batch,
                        const Vocab& vocab) {
  if (theta.vocab_size() != vocab.size()) {
    throw Error(ErrorCode::kVocabMismatch, "policy vocabulary does not match");
  }
  GradientResult out{PolicyGradient(theta.vocab_size(), theta.hyper()), {}};
  if (batch.empty()) return out;
  const double n = static_cast<double>(batch.size());
  for (const auto& t : batch) {
    const TokenSeq body = t.body(vocab);
    if (body.empty()) continue;
    const double len = static_cast<double>(body.size());
    const auto scored = score_sequence(theta, scored_prefix(t, vocab), body);
    out.report.loss += -scored.logprob / (len * n);
    backward_scored(theta, scored, -1.0 / (len * n), out.gradient);
  }
  out.report.grad_norm = l2_norm(out.gradient.flat());
  return out;
}

Adam::Adam(std::size_t size, AdamConfig config)
    : config_(config), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad, double learning_rate) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer state does not match parameter count");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    // grad is of the loss to minimise.
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grad[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
    const double update = (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.epsilon);
    params[i] -= learning_rate * (update + config_.weight_decay * params[i]);
  }
}

std::string_view to_string(TrainMode mode) { return mode == TrainMode::kSft ? "sft" : "cpo"; }

TrainMode parse_train_mode(std::string_view text) {
  if (text == "sft") return TrainMode::kSft;
  if (text == "cpo") return TrainMode::kCpo;
  throw Error(ErrorCode::kConfig, "unknown training mode '" + std::string(text) + "'");
}

void check_config(const CpoConfig& config) {
  if (!(config.beta > 0.0)) throw Error(ErrorCode::kConfig, "beta must be positive");
  if (!(config.learning_rate > 0.0)) {
    throw Error(ErrorCode::kConfig, "learning_rate must be positive");
  }
  if (config.batch_size == 0) throw Error(ErrorCode::kConfig, "batch_size must be positive");
  std::size_t expected = 0;
  for (const auto& span : config.regime_schedule) {
    if (span.begin != expected || span.end <= span.begin) {
      throw Error(ErrorCode::kConfig, "regime_schedule spans must be non-empty and contiguous from 0");
    }
    expected = span.end;
  }
}

CpoConfig parse_config(std::string_view document, CpoConfig defaults) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kConfig, "config must be an object");
  CpoConfig c = std::move(defaults);
  try {
    if (doc.contains("beta")) c.beta = doc.at("beta").get<double>();
    if (doc.contains("learning_rate")) c.learning_rate = doc.at("learning_rate").get<double>();
    if (doc.contains("steps")) c.steps = doc.at("steps").get<std::size_t>();
    if (doc.contains("batch_size")) c.batch_size = doc.at("batch_size").get<std::size_t>();
    if (doc.contains("seed")) c.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("regime_schedule")) {
      c.regime_schedule.clear();
      for (const auto& node : doc.at("regime_schedule")) {
        c.regime_schedule.push_back({node.at("regime").get<int>(),
                                     node.at("begin").get<std::size_t>(),
                                     node.at("end").get<std::size_t>()});
      }
    }
    if (doc.contains("adam")) {
      const auto& a = doc.at("adam");
      if (a.contains("beta1")) c.adam.beta1 = a.at("beta1").get<double>();
      if (a.contains("beta2")) c.adam.beta2 = a.at("beta2").get<double>();
      if (a.contains("epsilon")) c.adam.epsilon = a.at("epsilon").get<double>();
      if (a.contains("weight_decay")) c.adam.weight_decay = a.at("weight_decay").get<double>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  check_config(c);
  return c;
}

CpoConfig load_config(const std::string& path, CpoConfig defaults) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), std::move(defaults));
}

std::string serialize_config(const CpoConfig& config) {
  json doc = {{"beta", config.beta},
              {"learning_rate", config.learning_rate},
              {"steps", config.steps},
              {"batch_size", config.batch_size},
              {"seed", config.seed},
              {"regime_schedule", json::array()},
              {"adam",
               {{"beta1", config.adam.beta1},
                {"beta2", config.adam.beta2},
                {"epsilon", config.adam.epsilon},
                {"weight_decay", config.adam.weight_decay}}}};
  for (const auto& span : config.regime_schedule) {
    doc["regime_schedule"].push_back(
        {{"regime", span.regime}, {"begin", span.begin}, {"end", span.end}});
  }
  return doc.dump(2) + "\n";
}

TrainResult train(const PolicyParams& theta0, const PolicyParams* ref, const TrainingData& data,
                  const CpoConfig& config, TrainMode mode, const Vocab& vocab) {
  check_config(config);
  if (mode == TrainMode::kCpo) {
    if (ref == nullptr) throw Error(ErrorCode::kConfig, "cpo training needs a reference policy");
    require_shared_vocab(theta0, *ref, vocab);
  } else if (theta0.vocab_size() != vocab.size()) {
    throw Error(ErrorCode::kVocabMismatch, "policy vocabulary does not match");
  }

  TrainResult result{theta0, {}};
  Adam adam(theta0.flat().size(), config.adam);
  // Reference log-probabilities per (regime, pair index); ref never changes.
  std::map<int, std::vector<std::optional<std::pair<double, double>>>> ref_cache;

  auto regime_at = [&](std::size_t step) {
    if (config.regime_schedule.empty()) return 0;
    for (const auto& span : config.regime_schedule) {
      if (step >= span.begin && step < span.end) return span.regime;
    }
    throw Error(ErrorCode::kScheduleExhausted,
                "no regime scheduled for step " + std::to_string(step));
  };

  for (std::size_t step = 0; step < config.steps; ++step) {
    const int regime = regime_at(step);
    Rng rng(mix_seed(config.seed, step));
    GradientResult g;
    if (mode == TrainMode::kSft) {
      auto it = data.trajectories.find(regime);
      if (it == data.trajectories.end() || it->second.empty()) {
        throw Error(ErrorCode::kScheduleExhausted,
                    "no trajectories for regime " + std::to_string(regime));
      }
      std::vector<Trajectory> batch;
      batch.reserve(config.batch_size);
      for (std::size_t b = 0; b < config.batch_size; ++b) {
        batch.push_back(it->second[rng.below(it->second.size())]);
      }
      g = sft_grad(result.params, batch, vocab);
    } else {
      auto it = data.pairs.find(regime);
      if (it == data.pairs.end() || it->second.empty()) {
        throw Error(ErrorCode::kScheduleExhausted, "no pairs for regime " + std::to_string(regime));
      }
      auto& cache = ref_cache[regime];
      cache.resize(it->second.size());
      std::vector<PreferencePair> batch;
      std::vector<std::pair<double, double>> ref_lp;
      for (std::size_t b = 0; b < config.batch_size; ++b) {
        const std::size_t idx = rng.below(it->second.size());
        const auto& pair = it->second[idx];
        if (!cache[idx]) {
          cache[idx] = {sequence_logprob(*ref, pair.preferred, vocab),
                        sequence_logprob(*ref, pair.counterfactual, vocab)};
        }
        batch.push_back(pair);
        ref_lp.push_back(*cache[idx]);
      }
      g = cpo_grad(result.params, batch, ref_lp, vocab, config.beta);
    }
    if (!std::isfinite(g.report.loss) || !all_finite(g.gradient.flat())) {
      std::ostringstream why;
      why << "step " << step << " (" << to_string(mode) << ", regime " << regime
          << "): loss=" << g.report.loss << " grad_norm=" << g.report.grad_norm;
      throw Error(ErrorCode::kNonFiniteLoss, why.str());
    }
    adam.step(result.params.flat(), g.gradient.flat(), config.learning_rate);
    result.log.push_back({step, mode, g.report, regime});
  }
  return result;
}

std::string metric_log_csv(const std::vector<StepRecord>& log) {
  std::ostringstream out;
  out.precision(17);
  out << "step,mode,loss,margin,reward_diff,grad_norm,regime_id\n";
  for (const auto& r : log) {
    out << r.step << ',' << to_string(r.mode) << ',' << r.report.loss << ',' << r.report.margin
        << ',' << r.report.reward_diff << ',' << r.report.grad_norm << ',' << r.regime << '\n';
  }
  return out.str();
}

}  // namespace cpo
