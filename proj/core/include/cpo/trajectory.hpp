#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cpo/concept_graph.hpp"

namespace cpo {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kThinkToken = "<think>";
inline constexpr std::string_view kEndThinkToken = "</think>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kNegationWord = "no";

/// Default cap on the generated part of a trajectory, delimiters included.
inline constexpr std::size_t kDefaultMaxLength = 64;

/// Closed word-level vocabulary. Index 0 is <pad>; every entity owns exactly
/// one answer-label token whose text is the entity name.
class Vocab {
 public:
  /// `tokens[0]` must be <pad>; all tokens unique; every label must appear.
  Vocab(std::vector<std::string> tokens, std::vector<std::string> labels);

  /// Specials, entity labels, "no", every attribute word of `graph`, then
  /// `extra` tokens. Duplicates are folded.
  static Vocab from_graph(const ConceptGraph& graph, std::span<const std::string> extra = {});

  std::size_t size() const { return tokens_.size(); }
  const std::string& text(TokenId id) const;
  TokenId id(std::string_view token) const;  // throws kUnknownToken
  bool contains(std::string_view token) const;

  TokenId pad() const { return 0; }
  TokenId think() const { return think_; }
  TokenId end_think() const { return end_think_; }
  TokenId eos() const { return eos_; }
  bool is_special(TokenId id) const;

  /// Label tokens in entity order (lexicographic by entity name).
  std::span<const TokenId> labels() const { return labels_; }
  std::span<const std::string> label_names() const { return label_names_; }
  bool is_label(TokenId id) const;
  /// Position of `id` within labels(); throws kUnknownEntity for non-labels.
  std::size_t label_index(TokenId id) const;
  TokenId label_of(std::string_view entity) const;  // throws kUnknownEntity

  const std::vector<std::string>& tokens() const { return tokens_; }
  /// FNV-1a over the token list; checkpoints refuse to load across vocabularies.
  std::uint64_t hash() const;

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.tokens_ == b.tokens_ && a.label_names_ == b.label_names_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<std::string> label_names_;
  std::vector<TokenId> labels_;
  TokenId think_ = 0;
  TokenId end_think_ = 0;
  TokenId eos_ = 0;
};

struct Mention {
  std::string attribute;
  bool present = true;

  friend bool operator==(const Mention&, const Mention&) = default;
};
using Findings = std::vector<Mention>;

/// One chain-of-thought: the conditioning context (observation then prompt),
/// the thinking tokens between the delimiters, and the answer label.
struct Trajectory {
  TokenSeq context;
  TokenSeq thinking;
  TokenId answer = 0;

  /// <think> thinking </think> answer <eos>
  TokenSeq raw(const Vocab& vocab) const;
  /// Tokens scored by the policy: everything after the forced <think>.
  TokenSeq body(const Vocab& vocab) const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct PreferencePair {
  Trajectory preferred;
  Trajectory counterfactual;
  std::string source_entity;
  std::string target_entity;

  const TokenSeq& context() const { return preferred.context; }

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

TokenSeq tokenize(std::string_view text, const Vocab& vocab);
std::string detokenize(std::span<const TokenId> tokens, const Vocab& vocab);

Trajectory render_trajectory(const Findings& findings, std::string_view answer, const Vocab& vocab,
                             TokenSeq context = {});

Trajectory parse_trajectory(std::span<const TokenId> raw, const Vocab& vocab, TokenSeq context = {},
                            std::size_t max_length = kDefaultMaxLength);

/// Attribute phrases of a graph in token form.
class Lexicon {
 public:
  Lexicon(const ConceptGraph& graph, const Vocab& vocab);

  const TokenSeq& phrase(std::string_view attribute) const;
  const Vocab& vocab() const { return *vocab_; }
  const ConceptGraph& graph() const { return *graph_; }

  /// Recovers attribute mentions by greedy longest match; throws
  /// kMalformedTrajectory on tokens that belong to no phrase.
  Findings extract(std::span<const TokenId> thinking) const;

  /// Thinking tokens for `findings`, "no" before absent mentions.
  TokenSeq render(const Findings& findings) const;

 private:
  const ConceptGraph* graph_;
  const Vocab* vocab_;
  std::map<std::string, TokenSeq, std::less<>> phrases_;
  TokenId negation_;
};

Findings extract_findings(std::span<const TokenId> thinking, const Vocab& vocab,
                          const ConceptGraph& graph);

/// Report order: present mentions before absent ones, each group by
/// (category, attribute name).
bool canonical_before(const ConceptGraph& graph, const Mention& a, const Mention& b);
void canonical_sort(const ConceptGraph& graph, Findings& findings);

}  // namespace cpo
