#include "cpo/experiment.hpp"

#include <algorithm>
#include <optional>

#include "cpo/counterfactual.hpp"
#include "cpo/drift.hpp"
#include "cpo/error.hpp"
#include "cpo/rng.hpp"

namespace cpo {
namespace {

// Stream offsets for the independent pieces of one seeded run.
enum SeedSlot : std::uint64_t { kTrainData, kEvalData, kInit, kSft, kPairs, kCpo, kTrials };

std::vector<Trajectory> trajectories_of(const std::vector<SampleRecord>& records) {
  std::vector<Trajectory> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.trajectory);
  return out;
}

PolicyParams train_sft(const Vocab& vocab,
                       const std::vector<SampleRecord>& train_set, const PolicyHyper& hyper,
                       CpoConfig sft, std::uint64_t seed) {
  TrainingData data;
  data.trajectories[0] = trajectories_of(train_set);
  sft.seed = mix_seed(seed, kSft);
  const auto theta0 = init_policy(vocab.size(), hyper, mix_seed(seed, kInit));
  return train(theta0, nullptr, data, sft, TrainMode::kSft, vocab).params;
}

// Greedy reports that stop mid-phrase cannot be split into findings.
std::optional<Trajectory> try_splice(const Trajectory& base, const Trajectory& other,
                                     const Lexicon& lexicon) {
  try {
    return splice_findings(base, other, lexicon);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kMalformedTrajectory) throw;
    return std::nullopt;
  }
}

}  // namespace

std::vector<PreferencePair> pairs_for(const WorldSpec& spec, const Vocab& vocab,
                                      const std::vector<SampleRecord>& records,
                                      std::uint64_t seed) {
  const Lexicon lexicon(spec.graph, vocab);
  const auto& entities = spec.graph.entities();
  std::vector<PreferencePair> pairs;
  pairs.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& record = records[i];
    const auto source = vocab.text(record.trajectory.answer);
    const auto targets = valid_targets(spec.graph, source);
    if (targets.empty()) continue;
    const auto& marginals = spec.label_marginals.at(static_cast<std::size_t>(record.regime));
    std::vector<double> weights;
    weights.reserve(targets.size());
    for (const auto& target : targets) {
      const auto it = std::find(entities.begin(), entities.end(), target);
      weights.push_back(marginals[static_cast<std::size_t>(std::distance(entities.begin(), it))]);
    }
    Rng rng(mix_seed(seed, i));
    const auto& target = targets[rng.categorical(weights)];
    pairs.push_back(
        generate_pair(spec.graph, lexicon, vocab, record.trajectory, target, rng.next()));
  }
  return pairs;
}

AblationResult run_ablation(const AblationConfig& config, std::uint64_t seed) {
  const WorldSpec& spec = config.world;
  const Vocab vocab = world_vocab(spec);
  const auto train_set = generate_world(spec, config.train_size, mix_seed(seed, kTrainData));
  const auto eval_set = generate_world(spec, config.eval_size, mix_seed(seed, kEvalData));

  AblationResult result;
  result.seed = seed;
  const PolicyParams sft_policy =
      train_sft(vocab, train_set, config.hyper, config.sft, seed);

  TrainingData data;
  data.pairs[0] = pairs_for(spec, vocab, train_set, mix_seed(seed, kPairs));
  result.pair_count = data.pairs[0].size();
  CpoConfig cpo = config.cpo;
  cpo.seed = mix_seed(seed, kCpo);
  const PolicyParams cpo_policy =
      train(sft_policy, &sft_policy, data, cpo, TrainMode::kCpo, vocab).params;

  result.sft = evaluate(sft_policy, vocab, eval_set);
  result.cpo = evaluate(cpo_policy, vocab, eval_set);
  result.sft_confusable = subset_accuracy(result.sft, confusable_entities());
  result.cpo_confusable = subset_accuracy(result.cpo, confusable_entities());
  return result;
}

double DriftBenchmarkResult::true_positive_rate() const {
  return trials == 0 ? 0.0 : static_cast<double>(shifted_flagged) / static_cast<double>(trials);
}

double DriftBenchmarkResult::false_positive_rate() const {
  return trials == 0 ? 0.0
                     : static_cast<double>(stationary_flagged) / static_cast<double>(trials);
}

Trajectory splice_findings(const Trajectory& base, const Trajectory& other,
                           const Lexicon& lexicon) {
  const auto head = lexicon.extract(base.thinking);
  const auto tail = lexicon.extract(other.thinking);
  Findings spliced(head.begin(), head.begin() + static_cast<std::ptrdiff_t>(head.size() / 2));
  spliced.insert(spliced.end(), tail.begin() + static_cast<std::ptrdiff_t>(tail.size() / 2),
                 tail.end());
  Trajectory out;
  out.context = base.context;
  out.thinking = lexicon.render(spliced);
  out.answer = other.answer;
  return out;
}

WorldSpec drift_benchmark_world() {
  WorldSpec spec = demo_world_spec();
  spec.cue_rate = 1.0;
  spec.mention_rate = 1.0;
  return spec;
}

DriftBenchmarkResult run_drift_benchmark(const PolicyParams& policy, const WorldSpec& spec,
                                         const Vocab& vocab, const DriftBenchmarkConfig& config,
                                         std::uint64_t seed) {
  const Lexicon lexicon(spec.graph, vocab);
  SampleOptions greedy;
  greedy.greedy = true;
  DriftBenchmarkResult result;
  result.trials = config.trials;
  for (std::size_t i = 0; i < config.trials; ++i) {
    const std::uint64_t trial_seed = mix_seed(seed, i);
    std::uint64_t attempt = 0;
    Trajectory stationary;
    std::optional<Trajectory> shifted;
    while (!shifted) {
      const auto base = generate_regime(spec, 0, 1, mix_seed(trial_seed, attempt++)).front();
      stationary = sample(policy, vocab, base.trajectory.context, greedy);
      SampleRecord other;
      do {
        other = generate_regime(spec, 0, 1, mix_seed(trial_seed, attempt++)).front();
      } while (other.trajectory.answer == stationary.answer);
      shifted = try_splice(stationary, other.trajectory, lexicon);
    }
    const auto estimator =
        OutcomeEstimator::rollout(config.rollouts, mix_seed(trial_seed, 0xd1f7));
    const auto score = [&](const Trajectory& t) {
      return detect_drift(build_stream(policy, vocab, t, estimator), config.threshold);
    };
    const auto quiet = score(stationary);
    const auto moved = score(*shifted);
    result.stationary_flagged += quiet.any_flagged() ? 1 : 0;
    result.shifted_flagged += moved.any_flagged() ? 1 : 0;
    result.stationary_flag_total += quiet.flag_count();
    result.shifted_flag_total += moved.flag_count();
  }
  return result;
}

DriftBenchmarkResult run_drift_benchmark(const DriftBenchmarkConfig& config, std::uint64_t seed) {
  const WorldSpec& spec = config.world;
  const Vocab vocab = world_vocab(spec);
  const auto train_set = generate_world(spec, config.train_size, mix_seed(seed, kTrainData));
  const auto policy = train_sft(vocab, train_set, config.hyper, config.sft, seed);
  return run_drift_benchmark(policy, spec, vocab, config, mix_seed(seed, kTrials));
}

}  // namespace cpo
