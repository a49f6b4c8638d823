#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpo/trajectory.hpp"

namespace cpo {

struct PolicyHyper {
  std::size_t context_window = 8;  // k
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 64;

  friend bool operator==(const PolicyHyper&, const PolicyHyper&) = default;
};

/// Parameter tensors of the fixed-window MLP policy, stored contiguously:
///   embedding       |V| x d_e
///   hidden_weights  (k*d_e) x d_h
///   hidden_bias     d_h
///   output_weights  d_h x |V|
///   output_bias     |V|
/// Row-major throughout. The tag keeps parameters and gradients apart.
template <class Tag>
class ParamTensors {
 public:
  ParamTensors() = default;
  ParamTensors(std::size_t vocab_size, PolicyHyper hyper)
      : vocab_size_(vocab_size), hyper_(hyper), data_(total_size(vocab_size, hyper), 0.0) {}

  std::size_t vocab_size() const { return vocab_size_; }
  const PolicyHyper& hyper() const { return hyper_; }
  std::size_t input_dim() const { return hyper_.context_window * hyper_.embed_dim; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  std::span<double> embedding() { return slice(0, embedding_size()); }
  std::span<const double> embedding() const { return slice(0, embedding_size()); }
  std::span<double> hidden_weights() { return slice(hw_offset(), input_dim() * hyper_.hidden_dim); }
  std::span<const double> hidden_weights() const {
    return slice(hw_offset(), input_dim() * hyper_.hidden_dim);
  }
  std::span<double> hidden_bias() { return slice(hb_offset(), hyper_.hidden_dim); }
  std::span<const double> hidden_bias() const { return slice(hb_offset(), hyper_.hidden_dim); }
  std::span<double> output_weights() { return slice(ow_offset(), hyper_.hidden_dim * vocab_size_); }
  std::span<const double> output_weights() const {
    return slice(ow_offset(), hyper_.hidden_dim * vocab_size_);
  }
  std::span<double> output_bias() { return slice(ob_offset(), vocab_size_); }
  std::span<const double> output_bias() const { return slice(ob_offset(), vocab_size_); }

  bool same_shape(std::size_t vocab_size, const PolicyHyper& hyper) const {
    return vocab_size_ == vocab_size && hyper_ == hyper;
  }
  template <class Other>
  bool same_shape(const ParamTensors<Other>& other) const {
    return same_shape(other.vocab_size(), other.hyper());
  }

  friend bool operator==(const ParamTensors&, const ParamTensors&) = default;

 private:
  static std::size_t total_size(std::size_t v, const PolicyHyper& h) {
    const std::size_t in = h.context_window * h.embed_dim;
    return v * h.embed_dim + in * h.hidden_dim + h.hidden_dim + h.hidden_dim * v + v;
  }
  std::size_t embedding_size() const { return vocab_size_ * hyper_.embed_dim; }
  std::size_t hw_offset() const { return embedding_size(); }
  std::size_t hb_offset() const { return hw_offset() + input_dim() * hyper_.hidden_dim; }
  std::size_t ow_offset() const { return hb_offset() + hyper_.hidden_dim; }
  std::size_t ob_offset() const { return ow_offset() + hyper_.hidden_dim * vocab_size_; }

  std::span<double> slice(std::size_t offset, std::size_t n) {
    return std::span<double>(data_).subspan(offset, n);
  }
  std::span<const double> slice(std::size_t offset, std::size_t n) const {
    return std::span<const double>(data_).subspan(offset, n);
  }

  std::size_t vocab_size_ = 0;
  PolicyHyper hyper_;
  std::vector<double> data_;
};

struct ParamsTag;
struct GradientTag;
using PolicyParams = ParamTensors<ParamsTag>;
using PolicyGradient = ParamTensors<GradientTag>;

/// Uniform in [-scale, scale] from a seeded generator.
PolicyParams init_policy(std::size_t vocab_size, const PolicyHyper& hyper, std::uint64_t seed,
                         double scale = 0.05);

/// The last k tokens of `history`, left-padded with <pad> (id 0).
TokenSeq window_of(std::span<const TokenId> history, std::size_t k);

/// Unnormalized next-token scores for a window of exactly k tokens.
std::vector<double> logits(const PolicyParams& params, std::span<const TokenId> window);

/// Numerically stable log-softmax.
std::vector<double> log_softmax(std::span<const double> scores);

/// Sum over `targets` of log pi(target_j | prefix ++ targets_<j). The prefix is
/// conditioned on and not scored.
double sequence_logprob(const PolicyParams& params, std::span<const TokenId> prefix,
                        std::span<const TokenId> targets);

/// Scores the trajectory body given context ++ <think>.
double sequence_logprob(const PolicyParams& params, const Trajectory& trajectory,
                        const Vocab& vocab);

/// Adds d(weight * sequence_logprob)/d(params) into `grad`.
void accumulate_backward(const PolicyParams& params, std::span<const TokenId> prefix,
                         std::span<const TokenId> targets, double weight, PolicyGradient& grad);

PolicyGradient backward(const PolicyParams& params, const Trajectory& trajectory,
                        const Vocab& vocab, double upstream_weight);

/// Activations kept from one scored position for a later backward pass.
struct PositionActivations {
  TokenSeq window;
  TokenId target = 0;
  std::vector<double> hidden;  // post-tanh
  std::vector<double> logp;    // log-softmax over the vocabulary
};

/// A forward pass over `targets` whose activations can be replayed.
struct ScoredSequence {
  double logprob = 0.0;
  std::vector<PositionActivations> positions;
};

ScoredSequence score_sequence(const PolicyParams& params, std::span<const TokenId> prefix,
                              std::span<const TokenId> targets);

/// Adds d(weight * sum of position log-probs from `first` on)/d(params).
void backward_scored(const PolicyParams& params, const ScoredSequence& scored, double weight,
                     PolicyGradient& grad, std::size_t first = 0);

struct SampleOptions {
  std::uint64_t seed = 0;
  std::size_t max_length = kDefaultMaxLength;
  bool greedy = false;
};

/// Ancestral sampling: <think> is forced, thinking draws exclude
/// <pad>/<think>/<eos>, the answer is drawn among label tokens and <eos>
/// is forced after it. If the thinking budget (max_length - 4) runs out,
/// </think> is forced. The draw for thinking position j is an inverse-CDF
/// draw seeded by mix_seed(seed, j), so two continuations with the same seed
/// stay identical once their histories agree.
Trajectory sample(const PolicyParams& params, const Vocab& vocab, const TokenSeq& context,
                  const SampleOptions& options);

/// Continues a partially generated thinking segment; `prefix` starts at <think>.
Trajectory continue_from(const PolicyParams& params, const Vocab& vocab, const TokenSeq& context,
                         std::span<const TokenId> prefix, const SampleOptions& options);

void save_checkpoint(const std::string& path, const PolicyParams& params, const Vocab& vocab);

struct Checkpoint {
  PolicyParams params;
  Vocab vocab;
};

/// Throws kIo/kSchema on unreadable files; kVocabMismatch when `expected` is
/// given and its hash differs from the stored one.
Checkpoint load_checkpoint(const std::string& path, const Vocab* expected = nullptr);

}  // namespace cpo
