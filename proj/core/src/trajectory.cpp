#include "cpo/trajectory.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "cpo/error.hpp"

namespace cpo {
namespace {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

}  // namespace

Vocab::Vocab(std::vector<std::string> tokens, std::vector<std::string> labels)
    : tokens_(std::move(tokens)), label_names_(std::move(labels)) {
  if (tokens_.empty() || tokens_.front() != kPadToken) {
    throw Error(ErrorCode::kValidation, "vocabulary must start with <pad>");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty() || split_words(tokens_[i]).size() != 1) {
      throw Error(ErrorCode::kValidation, "vocabulary token '" + tokens_[i] + "' is not a word");
    }
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw Error(ErrorCode::kValidation, "duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
  think_ = id(kThinkToken);
  end_think_ = id(kEndThinkToken);
  eos_ = id(kEosToken);
  if (!std::is_sorted(label_names_.begin(), label_names_.end()) ||
      std::adjacent_find(label_names_.begin(), label_names_.end()) != label_names_.end()) {
    throw Error(ErrorCode::kValidation, "label names must be sorted and unique");
  }
  for (const auto& name : label_names_) {
    const TokenId t = id(name);
    if (is_special(t)) throw Error(ErrorCode::kValidation, "label cannot be a special token");
    labels_.push_back(t);
  }
}

Vocab Vocab::from_graph(const ConceptGraph& graph, std::span<const std::string> extra) {
  std::vector<std::string> tokens = {std::string(kPadToken), std::string(kThinkToken),
                                     std::string(kEndThinkToken), std::string(kEosToken)};
  std::set<std::string> seen(tokens.begin(), tokens.end());
  auto add = [&](const std::string& t) {
    if (seen.insert(t).second) tokens.push_back(t);
  };
  std::vector<std::string> labels(graph.entities().begin(), graph.entities().end());
  for (const auto& e : labels) add(e);
  add(std::string(kNegationWord));
  std::set<std::string> words;
  for (const auto& [name, attr] : graph.attributes()) {
    for (auto& w : split_words(name)) words.insert(std::move(w));
  }
  for (const auto& w : words) add(w);
  for (const auto& t : extra) add(t);
  return Vocab(std::move(tokens), std::move(labels));
}

const std::string& Vocab::text(TokenId id) const {
  if (id >= tokens_.size()) {
    throw Error(ErrorCode::kUnknownToken, "token id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

TokenId Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) throw Error(ErrorCode::kUnknownToken, std::string(token));
  return it->second;
}

bool Vocab::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

bool Vocab::is_special(TokenId id) const {
  return id == pad() || id == think_ || id == end_think_ || id == eos_;
}

bool Vocab::is_label(TokenId id) const {
  return std::find(labels_.begin(), labels_.end(), id) != labels_.end();
}

std::size_t Vocab::label_index(TokenId id) const {
  auto it = std::find(labels_.begin(), labels_.end(), id);
  if (it == labels_.end()) {
    throw Error(ErrorCode::kUnknownEntity, "token '" + text(id) + "' is not an answer label");
  }
  return static_cast<std::size_t>(it - labels_.begin());
}

TokenId Vocab::label_of(std::string_view entity) const {
  auto it = std::find(label_names_.begin(), label_names_.end(), entity);
  if (it == label_names_.end()) throw Error(ErrorCode::kUnknownEntity, std::string(entity));
  return labels_[static_cast<std::size_t>(it - label_names_.begin())];
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;  // separator
    h *= 0x100000001b3ULL;
  };
  for (const auto& t : tokens_) feed(t);
  feed("|labels|");
  for (const auto& l : label_names_) feed(l);
  return h;
}

TokenSeq Trajectory::raw(const Vocab& vocab) const {
  TokenSeq out;
  out.reserve(thinking.size() + 4);
  out.push_back(vocab.think());
  out.insert(out.end(), thinking.begin(), thinking.end());
  out.push_back(vocab.end_think());
  out.push_back(answer);
  out.push_back(vocab.eos());
  return out;
}

TokenSeq Trajectory::body(const Vocab& vocab) const {
  TokenSeq out;
  out.reserve(thinking.size() + 3);
  out.insert(out.end(), thinking.begin(), thinking.end());
  out.push_back(vocab.end_think());
  out.push_back(answer);
  out.push_back(vocab.eos());
  return out;
}

TokenSeq tokenize(std::string_view text, const Vocab& vocab) {
  TokenSeq out;
  for (const auto& w : split_words(text)) out.push_back(vocab.id(w));
  return out;
}

std::string detokenize(std::span<const TokenId> tokens, const Vocab& vocab) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += vocab.text(tokens[i]);
  }
  return out;
}

Trajectory render_trajectory(const Findings& findings, std::string_view answer, const Vocab& vocab,
                             TokenSeq context) {
  Trajectory t;
  t.context = std::move(context);
  const TokenId negation = vocab.id(kNegationWord);
  for (const auto& m : findings) {
    if (!m.present) t.thinking.push_back(negation);
    for (const auto& w : split_words(m.attribute)) t.thinking.push_back(vocab.id(w));
  }
  t.answer = vocab.label_of(answer);
  return t;
}

Trajectory parse_trajectory(std::span<const TokenId> raw, const Vocab& vocab, TokenSeq context,
                            std::size_t max_length) {
  auto fail = [](const std::string& why) -> Trajectory {
    throw Error(ErrorCode::kMalformedTrajectory, why);
  };
  if (raw.size() > max_length) return fail("trajectory exceeds the length cap");
  if (raw.size() < 4) return fail("trajectory shorter than <think> </think> answer <eos>");
  if (raw.front() != vocab.think()) return fail("trajectory must start with <think>");
  if (raw.back() != vocab.eos()) return fail("trajectory must end with <eos>");
  const auto close = std::find(raw.begin(), raw.end(), vocab.end_think());
  if (close == raw.end()) return fail("missing </think>");
  if (std::count(raw.begin(), raw.end(), vocab.end_think()) != 1) {
    return fail("more than one </think>");
  }
  const auto answer_span = std::span<const TokenId>(close + 1, raw.end() - 1);
  if (answer_span.size() != 1) {
    return fail("expected exactly one answer token, found " + std::to_string(answer_span.size()));
  }
  if (!vocab.is_label(answer_span.front())) return fail("answer is not an entity label");
  Trajectory t;
  t.context = std::move(context);
  for (auto it = raw.begin() + 1; it != close; ++it) {
    if (vocab.is_special(*it)) return fail("special token inside thinking segment");
    t.thinking.push_back(*it);
  }
  t.answer = answer_span.front();
  return t;
}

Lexicon::Lexicon(const ConceptGraph& graph, const Vocab& vocab)
    : graph_(&graph), vocab_(&vocab), negation_(vocab.id(kNegationWord)) {
  for (const auto& [name, attr] : graph.attributes()) {
    TokenSeq seq;
    for (const auto& w : split_words(name)) seq.push_back(vocab.id(w));
    phrases_.emplace(name, std::move(seq));
  }
}

const TokenSeq& Lexicon::phrase(std::string_view attribute) const {
  auto it = phrases_.find(attribute);
  if (it == phrases_.end()) throw Error(ErrorCode::kUnknownAttribute, std::string(attribute));
  return it->second;
}

Findings Lexicon::extract(std::span<const TokenId> thinking) const {
  Findings out;
  std::size_t i = 0;
  while (i < thinking.size()) {
    bool present = true;
    std::size_t start = i;
    if (thinking[i] == negation_) {
      present = false;
      ++start;
    }
    const std::string* best = nullptr;
    std::size_t best_len = 0;
    for (const auto& [name, seq] : phrases_) {
      if (seq.size() <= best_len || start + seq.size() > thinking.size()) continue;
      if (std::equal(seq.begin(), seq.end(), thinking.begin() + start)) {
        best = &name;
        best_len = seq.size();
      }
    }
    if (best == nullptr) {
      throw Error(ErrorCode::kMalformedTrajectory,
                  "no attribute phrase at thinking position " + std::to_string(i) + " ('" +
                      vocab_->text(thinking[i]) + "')");
    }
    out.push_back({*best, present});
    i = start + best_len;
  }
  return out;
}

TokenSeq Lexicon::render(const Findings& findings) const {
  TokenSeq out;
  for (const auto& m : findings) {
    if (!m.present) out.push_back(negation_);
    const auto& seq = phrase(m.attribute);
    out.insert(out.end(), seq.begin(), seq.end());
  }
  return out;
}

Findings extract_findings(std::span<const TokenId> thinking, const Vocab& vocab,
                          const ConceptGraph& graph) {
  return Lexicon(graph, vocab).extract(thinking);
}

bool canonical_before(const ConceptGraph& graph, const Mention& a, const Mention& b) {
  if (a.present != b.present) return a.present;
  const auto ca = graph.attribute(a.attribute).category;
  const auto cb = graph.attribute(b.attribute).category;
  if (ca != cb) return ca < cb;
  return a.attribute < b.attribute;
}

void canonical_sort(const ConceptGraph& graph, Findings& findings) {
  std::stable_sort(findings.begin(), findings.end(), [&](const Mention& a, const Mention& b) {
    return canonical_before(graph, a, b);
  });
}

}  // namespace cpo
