#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cpo/corpus.hpp"
#include "cpo/error.hpp"
#include "cpo/policy.hpp"

namespace cpo {

/// Sentence-level BLEU-1..4: clipped n-gram precisions, brevity penalty
/// exp(1 - r/c) when c < r, and a hard zero whenever some precision up to the
/// order is zero. Operates on token identity only.
template <class T>
std::array<double, 4> bleu(std::span<const T> candidate, std::span<const T> reference) {
  if (reference.empty()) throw Error(ErrorCode::kEmptyReference, "bleu: empty reference");
  std::array<double, 4> scores{};
  if (candidate.empty()) return scores;

  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double brevity = c < r ? std::exp(1.0 - r / c) : 1.0;

  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    if (candidate.size() < n) break;
    std::map<std::vector<T>, std::size_t> ref_counts;
    for (std::size_t i = 0; i + n <= reference.size(); ++i) {
      ++ref_counts[std::vector<T>(reference.begin() + i, reference.begin() + i + n)];
    }
    std::map<std::vector<T>, std::size_t> cand_counts;
    for (std::size_t i = 0; i + n <= candidate.size(); ++i) {
      ++cand_counts[std::vector<T>(candidate.begin() + i, candidate.begin() + i + n)];
    }
    std::size_t matched = 0;
    for (const auto& [gram, count] : cand_counts) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matched += std::min(count, it->second);
    }
    if (matched == 0) break;
    const double precision =
        static_cast<double>(matched) / static_cast<double>(candidate.size() - n + 1);
    log_sum += std::log(precision);
    scores[n - 1] = brevity * std::exp(log_sum / static_cast<double>(n));
  }
  return scores;
}

template <class T>
std::size_t lcs_length(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// LCS F-measure, F = (1 + beta^2) P R / (R + beta^2 P).
template <class T>
double rouge_l(std::span<const T> candidate, std::span<const T> reference, double beta = 1.2) {
  if (candidate.empty() || reference.empty()) {
    throw Error(ErrorCode::kEmptyInput, "rouge_l: empty input");
  }
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(candidate.size());
  const double recall = lcs / static_cast<double>(reference.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * precision * recall / (recall + b2 * precision);
}

struct EvalReport {
  double accuracy = 0.0;
  std::map<std::string, double> per_entity_accuracy;
  std::map<std::string, std::size_t> per_entity_count;
  std::array<double, 4> bleu{};
  double rouge_l = 0.0;
  std::size_t n = 0;
};

/// Throws kEmptyEvalSet on an empty record list.
/// Greedy-decodes every record and compares the answer with the gold label.
/// Text metrics compare generated and reference thinking segments and are
/// averaged over records; sentences with an empty side score zero.
EvalReport evaluate(const PolicyParams& policy, const Vocab& vocab,
                    const std::vector<SampleRecord>& records,
                    std::size_t max_length = kDefaultMaxLength);

/// Accuracy over the records whose gold entity is in `entities`.
/// Throws kEmptyEvalSet when no record belongs to the subset.
double subset_accuracy(const EvalReport& report, const std::vector<std::string>& entities);

/// key,value rows.
std::string eval_report_csv(const EvalReport& report);

}  // namespace cpo
