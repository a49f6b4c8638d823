#include "cpo/metrics.hpp"

#include <sstream>

namespace cpo {

EvalReport evaluate(const PolicyParams& policy, const Vocab& vocab,
                    const std::vector<SampleRecord>& records, std::size_t max_length) {
  if (records.empty()) throw Error(ErrorCode::kEmptyEvalSet, "no records to evaluate");
  EvalReport report;
  report.n = records.size();
  std::map<std::string, std::size_t> correct;
  std::size_t total_correct = 0;
  for (const auto& record : records) {
    SampleOptions options;
    options.greedy = true;
    options.max_length = max_length;
    const auto generated = sample(policy, vocab, record.trajectory.context, options);
    const std::string& gold = vocab.text(record.trajectory.answer);
    ++report.per_entity_count[gold];
    if (generated.answer == record.trajectory.answer) {
      ++correct[gold];
      ++total_correct;
    }
    const auto& reference = record.trajectory.thinking;
    if (!generated.thinking.empty() && !reference.empty()) {
      const auto b = bleu<TokenId>(generated.thinking, reference);
      for (std::size_t k = 0; k < 4; ++k) report.bleu[k] += b[k];
      report.rouge_l += rouge_l<TokenId>(generated.thinking, reference);
    }
  }
  const double n = static_cast<double>(report.n);
  report.accuracy = static_cast<double>(total_correct) / n;
  for (double& b : report.bleu) b /= n;
  report.rouge_l /= n;
  for (const auto& [entity, count] : report.per_entity_count) {
    report.per_entity_accuracy[entity] =
        static_cast<double>(correct[entity]) / static_cast<double>(count);
  }
  return report;
}

double subset_accuracy(const EvalReport& report, const std::vector<std::string>& entities) {
  double hits = 0.0;
  std::size_t total = 0;
  for (const auto& e : entities) {
    auto it = report.per_entity_count.find(e);
    if (it == report.per_entity_count.end()) continue;
    hits += report.per_entity_accuracy.at(e) * static_cast<double>(it->second);
    total += it->second;
  }
  if (total == 0) throw Error(ErrorCode::kEmptyEvalSet, "no records in the requested subset");
  return hits / static_cast<double>(total);
}

std::string eval_report_csv(const EvalReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "key,value\n";
  out << "n," << report.n << '\n';
  out << "accuracy," << report.accuracy << '\n';
  for (std::size_t k = 0; k < 4; ++k) out << "bleu_" << k + 1 << ',' << report.bleu[k] << '\n';
  out << "rouge_l," << report.rouge_l << '\n';
  for (const auto& [entity, acc] : report.per_entity_accuracy) {
    out << "accuracy:" << entity << ',' << acc << '\n';
    out << "count:" << entity << ',' << report.per_entity_count.at(entity) << '\n';
  }
  return out.str();
}

}  // namespace cpo
