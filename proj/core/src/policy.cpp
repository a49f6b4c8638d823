#include "cpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "cpo/error.hpp"
#include "cpo/rng.hpp"

namespace cpo {
namespace {

constexpr char kMagic[8] = {'C', 'P', 'O', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_window(const PolicyParams& params, std::span<const TokenId> window) {
  if (window.size() != params.hyper().context_window) {
    throw Error(ErrorCode::kShapeMismatch, "window has " + std::to_string(window.size()) +
                                               " tokens, policy expects " +
                                               std::to_string(params.hyper().context_window));
  }
  for (TokenId t : window) {
    if (t >= params.vocab_size()) {
      throw Error(ErrorCode::kShapeMismatch, "token id " + std::to_string(t) +
                                                 " outside policy vocabulary of " +
                                                 std::to_string(params.vocab_size()));
    }
  }
}

void forward_position(const PolicyParams& params, std::span<const TokenId> window,
                      TokenId target, PositionActivations& out) {
  check_window(params, window);
  if (target >= params.vocab_size()) {
    throw Error(ErrorCode::kShapeMismatch, "target token outside policy vocabulary");
  }
  const auto& h = params.hyper();
  const std::size_t de = h.embed_dim, dh = h.hidden_dim, v = params.vocab_size();
  const auto emb = params.embedding();
  const auto w1 = params.hidden_weights();
  const auto b1 = params.hidden_bias();
  const auto w2 = params.output_weights();
  const auto b2 = params.output_bias();

  out.window.assign(window.begin(), window.end());
  out.target = target;
  out.hidden.assign(b1.begin(), b1.end());
  for (std::size_t i = 0; i < window.size(); ++i) {
    const double* x = emb.data() + window[i] * de;
    for (std::size_t e = 0; e < de; ++e) {
      const double* row = w1.data() + (i * de + e) * dh;
      for (std::size_t j = 0; j < dh; ++j) out.hidden[j] += x[e] * row[j];
    }
  }
  for (double& a : out.hidden) a = std::tanh(a);

  out.logp.assign(b2.begin(), b2.end());
  for (std::size_t j = 0; j < dh; ++j) {
    const double a = out.hidden[j];
    const double* row = w2.data() + j * v;
    for (std::size_t t = 0; t < v; ++t) out.logp[t] += a * row[t];
  }
  double mx = kNegInf;
  for (double s : out.logp) mx = std::max(mx, s);
  double sum = 0.0;
  for (double s : out.logp) sum += std::exp(s - mx);
  const double lse = mx + std::log(sum);
  for (double& s : out.logp) s -= lse;
}

/// d(weight * logp[target]) back through one recorded position.
void backward_position(const PolicyParams& params, const PositionActivations& act, double weight,
                       PolicyGradient& grad, std::vector<double>& dlogit,
                       std::vector<double>& dpre) {
  const auto& h = params.hyper();
  const std::size_t de = h.embed_dim, dh = h.hidden_dim, v = params.vocab_size();
  const auto emb = params.embedding();
  const auto w1 = params.hidden_weights();
  const auto w2 = params.output_weights();
  auto g_emb = grad.embedding();
  auto g_w1 = grad.hidden_weights();
  auto g_b1 = grad.hidden_bias();
  auto g_w2 = grad.output_weights();
  auto g_b2 = grad.output_bias();

  // d logp[target] / d logit[t] = 1{t = target} - softmax[t]
  dlogit.resize(v);
  for (std::size_t t = 0; t < v; ++t) dlogit[t] = -weight * std::exp(act.logp[t]);
  dlogit[act.target] += weight;

  for (std::size_t t = 0; t < v; ++t) g_b2[t] += dlogit[t];
  dpre.assign(dh, 0.0);
  for (std::size_t j = 0; j < dh; ++j) {
    const double a = act.hidden[j];
    const double* row = w2.data() + j * v;
    double* grow = g_w2.data() + j * v;
    double acc = 0.0;
    for (std::size_t t = 0; t < v; ++t) {
      grow[t] += a * dlogit[t];
      acc += row[t] * dlogit[t];
    }
    dpre[j] = acc * (1.0 - a * a);  // through tanh
  }
  for (std::size_t j = 0; j < dh; ++j) g_b1[j] += dpre[j];
  for (std::size_t i = 0; i < act.window.size(); ++i) {
    const std::size_t token = act.window[i];
    const double* x = emb.data() + token * de;
    for (std::size_t e = 0; e < de; ++e) {
      const std::size_t in = i * de + e;
      const double* row = w1.data() + in * dh;
      double* grow = g_w1.data() + in * dh;
      double dx = 0.0;
      for (std::size_t j = 0; j < dh; ++j) {
        grow[j] += x[e] * dpre[j];
        dx += row[j] * dpre[j];
      }
      g_emb[token * de + e] += dx;
    }
  }
}

TokenSeq concat(std::span<const TokenId> a, std::span<const TokenId> b) {
  TokenSeq out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

TokenSeq trajectory_prefix(const Trajectory& t, const Vocab& vocab) {
  TokenSeq prefix = t.context;
  prefix.push_back(vocab.think());
  return prefix;
}

void require_vocab(const PolicyParams& params, const Vocab& vocab) {
  if (params.vocab_size() != vocab.size()) {
    throw Error(ErrorCode::kVocabMismatch, "policy vocabulary has " +
                                               std::to_string(params.vocab_size()) +
                                               " tokens, vocab has " + std::to_string(vocab.size()));
  }
}

// Draw key of the answer; thinking draw j uses key j.
constexpr std::uint64_t kAnswerDraw = ~std::uint64_t{0};

std::size_t pick(std::span<const double> logp, bool greedy, std::uint64_t draw_seed) {
  if (greedy) {
    return static_cast<std::size_t>(std::max_element(logp.begin(), logp.end()) - logp.begin());
  }
  std::vector<double> w(logp.size());
  for (std::size_t i = 0; i < logp.size(); ++i) w[i] = std::exp(logp[i]);
  Rng rng(draw_seed);
  return rng.categorical(w);
}

template <class T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorCode::kSchema, "truncated checkpoint " + path);
  return value;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::string& path) {
  const auto n = read_pod<std::uint32_t>(in, path);
  if (n > (1u << 20)) throw Error(ErrorCode::kSchema, "implausible string length in " + path);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw Error(ErrorCode::kSchema, "truncated checkpoint " + path);
  return s;
}

}  // namespace

PolicyParams init_policy(std::size_t vocab_size, const PolicyHyper& hyper, std::uint64_t seed,
                         double scale) {
  PolicyParams params(vocab_size, hyper);
  Rng rng(seed);
  for (double& x : params.flat()) x = rng.uniform(-scale, scale);
  return params;
}

TokenSeq window_of(std::span<const TokenId> history, std::size_t k) {
  TokenSeq window(k, 0);
  const std::size_t n = std::min(k, history.size());
  std::copy(history.end() - static_cast<std::ptrdiff_t>(n), history.end(),
            window.end() - static_cast<std::ptrdiff_t>(n));
  return window;
}

std::vector<double> logits(const PolicyParams& params, std::span<const TokenId> window) {
  check_window(params, window);
  const auto& h = params.hyper();
  const std::size_t de = h.embed_dim, dh = h.hidden_dim, v = params.vocab_size();
  std::vector<double> hidden(params.hidden_bias().begin(), params.hidden_bias().end());
  const auto emb = params.embedding();
  const auto w1 = params.hidden_weights();
  for (std::size_t i = 0; i < window.size(); ++i) {
    for (std::size_t e = 0; e < de; ++e) {
      const double x = emb[window[i] * de + e];
      const double* row = w1.data() + (i * de + e) * dh;
      for (std::size_t j = 0; j < dh; ++j) hidden[j] += x * row[j];
    }
  }
  std::vector<double> out(params.output_bias().begin(), params.output_bias().end());
  const auto w2 = params.output_weights();
  for (std::size_t j = 0; j < dh; ++j) {
    const double a = std::tanh(hidden[j]);
    for (std::size_t t = 0; t < v; ++t) out[t] += a * w2[j * v + t];
  }
  return out;
}

std::vector<double> log_softmax(std::span<const double> scores) {
  double mx = kNegInf;
  for (double s : scores) mx = std::max(mx, s);
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] - lse;
  return out;
}

ScoredSequence score_sequence(const PolicyParams& params, std::span<const TokenId> prefix,
                              std::span<const TokenId> targets) {
  const std::size_t k = params.hyper().context_window;
  const TokenSeq full = concat(prefix, targets);
  ScoredSequence out;
  out.positions.resize(targets.size());
  for (std::size_t p = 0; p < targets.size(); ++p) {
    const auto history = std::span<const TokenId>(full).first(prefix.size() + p);
    forward_position(params, window_of(history, k), targets[p], out.positions[p]);
    out.logprob += out.positions[p].logp[targets[p]];
  }
  return out;
}

void backward_scored(const PolicyParams& params, const ScoredSequence& scored, double weight,
                     PolicyGradient& grad, std::size_t first) {
  if (!grad.same_shape(params)) {
    throw Error(ErrorCode::kShapeMismatch, "gradient buffer does not match policy shape");
  }
  if (weight == 0.0) return;
  std::vector<double> dlogit, dpre;
  for (std::size_t p = first; p < scored.positions.size(); ++p) {
    backward_position(params, scored.positions[p], weight, grad, dlogit, dpre);
  }
}

double sequence_logprob(const PolicyParams& params, std::span<const TokenId> prefix,
                        std::span<const TokenId> targets) {
  const std::size_t k = params.hyper().context_window;
  const TokenSeq full = concat(prefix, targets);
  PositionActivations act;
  double total = 0.0;
  for (std::size_t p = 0; p < targets.size(); ++p) {
    const auto history = std::span<const TokenId>(full).first(prefix.size() + p);
    forward_position(params, window_of(history, k), targets[p], act);
    total += act.logp[targets[p]];
  }
  return total;
}

double sequence_logprob(const PolicyParams& params, const Trajectory& trajectory,
                        const Vocab& vocab) {
  require_vocab(params, vocab);
  return sequence_logprob(params, trajectory_prefix(trajectory, vocab), trajectory.body(vocab));
}

void accumulate_backward(const PolicyParams& params, std::span<const TokenId> prefix,
                         std::span<const TokenId> targets, double weight, PolicyGradient& grad) {
  if (!grad.same_shape(params)) {
    throw Error(ErrorCode::kShapeMismatch, "gradient buffer does not match policy shape");
  }
  if (weight == 0.0) return;
  const std::size_t k = params.hyper().context_window;
  const TokenSeq full = concat(prefix, targets);
  PositionActivations act;
  std::vector<double> dlogit, dpre;
  for (std::size_t p = 0; p < targets.size(); ++p) {
    const auto history = std::span<const TokenId>(full).first(prefix.size() + p);
    forward_position(params, window_of(history, k), targets[p], act);
    backward_position(params, act, weight, grad, dlogit, dpre);
  }
}

PolicyGradient backward(const PolicyParams& params, const Trajectory& trajectory,
                        const Vocab& vocab, double upstream_weight) {
  require_vocab(params, vocab);
  PolicyGradient grad(params.vocab_size(), params.hyper());
  accumulate_backward(params, trajectory_prefix(trajectory, vocab), trajectory.body(vocab),
                      upstream_weight, grad);
  return grad;
}

Trajectory continue_from(const PolicyParams& params, const Vocab& vocab, const TokenSeq& context,
                         std::span<const TokenId> prefix, const SampleOptions& options) {
  require_vocab(params, vocab);
  if (prefix.empty() || prefix.front() != vocab.think() ||
      std::find(prefix.begin(), prefix.end(), vocab.end_think()) != prefix.end()) {
    throw Error(ErrorCode::kBadPrefix, "continuation prefix must open with <think>");
  }
  const std::size_t k = params.hyper().context_window;
  const std::size_t budget = options.max_length >= 4 ? options.max_length - 4 : 0;

  Trajectory out;
  out.context = context;
  out.thinking.assign(prefix.begin() + 1, prefix.end());
  TokenSeq history = concat(context, prefix);

  std::vector<double> masked;
  while (out.thinking.size() < budget) {
    const auto lp = log_softmax(logits(params, window_of(history, k)));
    masked = lp;
    masked[vocab.pad()] = kNegInf;
    masked[vocab.think()] = kNegInf;
    masked[vocab.eos()] = kNegInf;
    // Renormalise over the allowed tokens.
    masked = log_softmax(masked);
    const auto next = static_cast<TokenId>(
        pick(masked, options.greedy, mix_seed(options.seed, out.thinking.size())));
    if (next == vocab.end_think()) break;
    out.thinking.push_back(next);
    history.push_back(next);
  }
  history.push_back(vocab.end_think());

  const auto lp = logits(params, window_of(history, k));
  std::vector<double> label_scores;
  for (TokenId l : vocab.labels()) label_scores.push_back(lp[l]);
  const auto label_logp = log_softmax(label_scores);
  out.answer = vocab.labels()[pick(label_logp, options.greedy, mix_seed(options.seed, kAnswerDraw))];
  return out;
}

Trajectory sample(const PolicyParams& params, const Vocab& vocab, const TokenSeq& context,
                  const SampleOptions& options) {
  const TokenId think = vocab.think();
  return continue_from(params, vocab, context, std::span<const TokenId>(&think, 1), options);
}

void save_checkpoint(const std::string& path, const PolicyParams& params, const Vocab& vocab) {
  require_vocab(params, vocab);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kCheckpointVersion);
  write_pod(out, vocab.hash());
  const auto& h = params.hyper();
  write_pod(out, static_cast<std::uint64_t>(h.context_window));
  write_pod(out, static_cast<std::uint64_t>(h.embed_dim));
  write_pod(out, static_cast<std::uint64_t>(h.hidden_dim));
  write_pod(out, static_cast<std::uint64_t>(vocab.size()));
  for (const auto& t : vocab.tokens()) write_string(out, t);
  write_pod(out, static_cast<std::uint64_t>(vocab.label_names().size()));
  for (const auto& l : vocab.label_names()) write_string(out, l);
  const auto flat = params.flat();
  write_pod(out, static_cast<std::uint64_t>(flat.size()));
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!out) throw Error(ErrorCode::kIo, "failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path, const Vocab* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open checkpoint " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kSchema, path + " is not a policy checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kSchema, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto stored_hash = read_pod<std::uint64_t>(in, path);
  if (expected != nullptr && expected->hash() != stored_hash) {
    throw Error(ErrorCode::kVocabMismatch, "checkpoint " + path + " was trained on another vocabulary");
  }
  PolicyHyper hyper;
  hyper.context_window = read_pod<std::uint64_t>(in, path);
  hyper.embed_dim = read_pod<std::uint64_t>(in, path);
  hyper.hidden_dim = read_pod<std::uint64_t>(in, path);
  const auto vocab_size = read_pod<std::uint64_t>(in, path);
  if (vocab_size > (1u << 24)) throw Error(ErrorCode::kSchema, "implausible vocabulary size");
  std::vector<std::string> tokens;
  for (std::uint64_t i = 0; i < vocab_size; ++i) tokens.push_back(read_string(in, path));
  const auto n_labels = read_pod<std::uint64_t>(in, path);
  if (n_labels > vocab_size) throw Error(ErrorCode::kSchema, "implausible label count");
  std::vector<std::string> labels;
  for (std::uint64_t i = 0; i < n_labels; ++i) labels.push_back(read_string(in, path));
  Vocab vocab(std::move(tokens), std::move(labels));
  if (vocab.hash() != stored_hash) throw Error(ErrorCode::kSchema, "corrupt vocabulary in " + path);

  PolicyParams params(vocab.size(), hyper);
  const auto n = read_pod<std::uint64_t>(in, path);
  if (n != params.flat().size()) throw Error(ErrorCode::kSchema, "parameter count mismatch");
  in.read(reinterpret_cast<char*>(params.flat().data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw Error(ErrorCode::kSchema, "truncated checkpoint " + path);
  return Checkpoint{std::move(params), std::move(vocab)};
}

}  // namespace cpo
