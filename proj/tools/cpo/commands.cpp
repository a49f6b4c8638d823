#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <string_view>

#include "cpo/concept_graph.hpp"
#include "cpo/counterfactual.hpp"
#include "cpo/drift.hpp"
#include "cpo/error.hpp"
#include "cpo/experiment.hpp"
#include "cpo/metrics.hpp"
#include "cpo/objective.hpp"
#include "cpo/rng.hpp"
#include "manifest.hpp"

namespace cpo::cli {
namespace {

using nlohmann::ordered_json;

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::kConfig, message);
}

ordered_json describe(const WorldOptions& world) {
  ordered_json doc;
  doc["graph"] = world.graph.empty() ? "builtin:demo" : world.graph;
  doc["regimes"] = world.regimes;
  doc["shift_tv"] = world.shift_tv;
  return doc;
}

ordered_json describe_rates(const WorldSpec& spec) {
  return {{"cue_rate", spec.cue_rate},
          {"mention_rate", spec.mention_rate},
          {"negation_rate", spec.negation_rate},
          {"attribute_noise", spec.attribute_noise}};
}

void record_graph(RunManifest& manifest, const WorldOptions& world) {
  if (!world.graph.empty()) manifest.add_input("graph", world.graph);
}

std::vector<Trajectory> trajectories_of(const std::vector<SampleRecord>& records) {
  std::vector<Trajectory> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.trajectory);
  return out;
}

}  // namespace

WorldSpec world_from(const WorldOptions& options) {
  WorldSpec spec;
  if (options.graph.empty()) {
    spec = demo_world_spec(options.regimes, options.shift_tv);
  } else {
    spec.graph = load_graph(options.graph);
    const auto base = zipf_marginals(spec.graph.entities().size(), 1.2);
    spec.label_marginals =
        shifted_regimes(base, std::max<std::size_t>(options.regimes, 1), options.shift_tv);
  }
  if (options.cue_rate) spec.cue_rate = *options.cue_rate;
  if (options.mention_rate) spec.mention_rate = *options.mention_rate;
  if (options.negation_rate) spec.negation_rate = *options.negation_rate;
  if (options.attribute_noise) spec.attribute_noise = *options.attribute_noise;
  check_world(spec);
  return spec;
}

void gen_data(const GenDataOptions& options) {
  const WorldSpec spec = world_from(options.world);
  const Vocab vocab = world_vocab(spec);
  const auto records = generate_world(spec, options.n, options.seed);

  const auto out = output_path(options.out);
  save_samples(records, vocab, out.string());

  RunManifest manifest("gen-data");
  manifest.set_seed(options.seed);
  manifest.config() = describe(options.world);
  manifest.config()["rates"] = describe_rates(spec);
  manifest.config()["n"] = options.n;
  record_graph(manifest, options.world);
  manifest.add_output("samples", out);
  manifest.write(out);
  std::cout << "wrote " << records.size() << " records to " << out.string() << '\n';
}

void gen_counterfactuals(const GenCounterfactualsOptions& options) {
  const WorldSpec spec = world_from(options.world);
  const Vocab vocab = world_vocab(spec);
  const auto records = load_samples(options.samples, vocab);

  std::vector<PreferencePair> pairs;
  if (options.targets == "sampled") {
    pairs = pairs_for(spec, vocab, records, options.seed);
  } else {
    pairs = generate_pairs(spec.graph, vocab, trajectories_of(records), options.seed);
  }

  const auto out = output_path(options.out);
  save_pairs(pairs, vocab, out.string());

  RunManifest manifest("gen-counterfactuals");
  manifest.set_seed(options.seed);
  manifest.config() = describe(options.world);
  manifest.config()["targets"] = options.targets;
  record_graph(manifest, options.world);
  manifest.add_input("samples", options.samples);
  manifest.add_output("pairs", out);
  manifest.write(out);
  std::cout << "wrote " << pairs.size() << " pairs to " << out.string() << '\n';
}

void train(const TrainOptions& options) {
  const TrainMode mode = parse_train_mode(options.mode);
  const bool cpo_mode = mode == TrainMode::kCpo;
  require(!cpo_mode || !options.ref.empty(), "cpo mode requires --ref");
  require(cpo_mode || options.ref.empty(), "--ref only applies to cpo mode");
  require(!cpo_mode || !options.pairs.empty(), "cpo mode requires --pairs");
  require(cpo_mode || !options.samples.empty(), "sft mode requires --samples");

  CpoConfig config = cpo_mode ? CpoConfig{} : sft_stage();
  if (!options.config.empty()) config = load_config(options.config, config);
  if (options.steps) config.steps = *options.steps;
  if (options.learning_rate) config.learning_rate = *options.learning_rate;
  if (options.beta) config.beta = *options.beta;
  if (options.batch_size) config.batch_size = *options.batch_size;
  config.seed = options.seed;
  check_config(config);

  const WorldSpec spec = world_from(options.world);
  const Vocab vocab = world_vocab(spec);

  // Every input is loaded and validated before training starts.
  TrainingData data;
  if (cpo_mode) {
    data.pairs[0] = load_pairs(options.pairs, vocab);
  } else {
    for (auto& record : load_samples(options.samples, vocab)) {
      data.trajectories[record.regime].push_back(std::move(record.trajectory));
    }
  }
  std::optional<Checkpoint> ref;
  if (cpo_mode) ref = load_checkpoint(options.ref, &vocab);
  PolicyParams theta0;
  if (!options.resume.empty()) {
    theta0 = load_checkpoint(options.resume, &vocab).params;
  } else if (ref) {
    theta0 = ref->params;
  } else {
    theta0 = init_policy(vocab.size(), options.hyper, mix_seed(options.seed, 0));
  }
  if (ref && !theta0.same_shape(ref->params)) {
    throw Error(ErrorCode::kShapeMismatch, "--resume and --ref checkpoints differ in shape");
  }

  const TrainResult result =
      cpo::train(theta0, ref ? &ref->params : nullptr, data, config, mode, vocab);

  const auto out = output_path(options.out);
  save_checkpoint(out.string(), result.params, vocab);
  const auto metrics =
      output_path(options.metrics.empty() ? options.out + ".metrics.csv" : options.metrics);
  write_text(metrics, metric_log_csv(result.log));

  RunManifest manifest("train");
  manifest.set_seed(options.seed);
  manifest.config() = describe(options.world);
  manifest.config()["mode"] = std::string(to_string(mode));
  manifest.config()["optimizer"] = ordered_json::parse(serialize_config(config));
  const PolicyHyper& hyper = result.params.hyper();
  manifest.config()["policy"] = {{"context_window", hyper.context_window},
                                 {"embed_dim", hyper.embed_dim},
                                 {"hidden_dim", hyper.hidden_dim}};
  record_graph(manifest, options.world);
  if (!options.config.empty()) manifest.add_input("config", options.config);
  if (!options.samples.empty()) manifest.add_input("samples", options.samples);
  if (!options.pairs.empty()) manifest.add_input("pairs", options.pairs);
  if (!options.resume.empty()) manifest.add_input("resume", options.resume);
  if (!options.ref.empty()) manifest.add_input("ref", options.ref);
  manifest.add_output("checkpoint", out);
  manifest.add_output("metrics", metrics);
  manifest.write(out);

  std::cout << to_string(mode) << ": " << result.log.size() << " steps";
  if (!result.log.empty()) std::cout << ", final loss " << result.log.back().report.loss;
  std::cout << ", checkpoint " << out.string() << '\n';
}

void monitor(const MonitorOptions& options) {
  require(options.threshold >= 0.0 && options.threshold <= 1.0, "--threshold must lie in [0, 1]");
  require(options.estimator != "rollout" || options.rollouts > 0, "--rollouts must be positive");
  const WorldSpec spec = world_from(options.world);
  const Vocab vocab = world_vocab(spec);
  const auto records = load_samples(options.corpus, vocab);
  const Checkpoint ckpt = load_checkpoint(options.ckpt, &vocab);

  SampleOptions greedy;
  greedy.greedy = true;
  std::ostringstream csv;
  csv << "record,position,tv,kl,token_logprob,flagged\n";
  std::size_t flagged_positions = 0;
  std::size_t flagged_records = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Trajectory trajectory =
        options.source == "policy"
            ? sample(ckpt.params, vocab, records[i].trajectory.context, greedy)
            : records[i].trajectory;
    const OutcomeEstimator estimator =
        options.estimator == "rollout"
            ? OutcomeEstimator::rollout(options.rollouts, mix_seed(options.seed, i))
            : OutcomeEstimator::exact();
    const DriftReport report =
        detect_drift(build_stream(ckpt.params, vocab, trajectory, estimator), options.threshold);
    flagged_positions += report.flag_count();
    flagged_records += report.any_flagged() ? 1 : 0;

    std::istringstream rows(drift_trace_csv(report));
    std::string row;
    std::getline(rows, row);  // header
    while (std::getline(rows, row)) csv << i << ',' << row << '\n';
  }

  const auto out = output_path(options.out);
  write_text(out, csv.str());

  RunManifest manifest("monitor");
  manifest.set_seed(options.seed);
  manifest.config() = describe(options.world);
  manifest.config()["threshold"] = options.threshold;
  manifest.config()["source"] = options.source;
  manifest.config()["estimator"] = options.estimator;
  if (options.estimator == "rollout") manifest.config()["rollouts"] = options.rollouts;
  manifest.config()["records"] = records.size();
  manifest.config()["flagged_positions"] = flagged_positions;
  manifest.config()["flagged_records"] = flagged_records;
  record_graph(manifest, options.world);
  manifest.add_input("checkpoint", options.ckpt);
  manifest.add_input("corpus", options.corpus);
  manifest.add_output("trace", out);
  manifest.write(out);
  std::cout << records.size() << " streams, " << flagged_positions << " flagged positions in "
            << flagged_records << " streams\n";
}

void eval(const EvalOptions& options) {
  const WorldSpec spec = world_from(options.world);
  const Vocab vocab = world_vocab(spec);
  const auto records = load_samples(options.corpus, vocab);
  const Checkpoint ckpt = load_checkpoint(options.ckpt, &vocab);
  const EvalReport report = evaluate(ckpt.params, vocab, records, options.max_length);

  const auto out = output_path(options.out);
  write_text(out, eval_report_csv(report));

  RunManifest manifest("eval");
  manifest.config() = describe(options.world);
  manifest.config()["max_length"] = options.max_length;
  record_graph(manifest, options.world);
  manifest.add_input("checkpoint", options.ckpt);
  manifest.add_input("corpus", options.corpus);
  manifest.add_output("report", out);
  manifest.write(out);
  std::cout << "accuracy " << report.accuracy << " over " << report.n << " records\n";
}

}  // namespace cpo::cli
