#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cpo/corpus.hpp"
#include "cpo/policy.hpp"

namespace cpo::cli {

/// World definition shared by every subcommand. Only the graph and prompt
/// shape the vocabulary; the rates matter to gen-data alone.
struct WorldOptions {
  std::string graph;  // empty selects the built-in demo world
  std::size_t regimes = 1;
  double shift_tv = 0.0;
  std::optional<double> cue_rate;
  std::optional<double> mention_rate;
  std::optional<double> negation_rate;
  std::optional<double> attribute_noise;
};

WorldSpec world_from(const WorldOptions& options);

struct GenDataOptions {
  WorldOptions world;
  std::size_t n = 200;
  std::uint64_t seed = 0;
  std::string out = "samples.jsonl";
};

struct GenCounterfactualsOptions {
  WorldOptions world;
  std::string samples;
  std::string targets = "all";  // all | sampled
  std::uint64_t seed = 0;
  std::string out = "pairs.jsonl";
};

struct TrainOptions {
  WorldOptions world;
  std::string mode;
  std::string config;
  std::string resume;
  std::string ref;
  std::string samples;
  std::string pairs;
  std::optional<std::size_t> steps;
  std::optional<double> learning_rate;
  std::optional<double> beta;
  std::optional<std::size_t> batch_size;
  PolicyHyper hyper;
  std::uint64_t seed = 0;
  std::string out = "policy.ckpt";
  std::string metrics;  // defaults to <out>.metrics.csv
};

struct MonitorOptions {
  WorldOptions world;
  std::string ckpt;
  std::string corpus;
  double threshold = 0.2;
  std::string source = "policy";  // corpus | policy
  std::string estimator = "rollout";  // exact | rollout
  std::size_t rollouts = 128;
  std::uint64_t seed = 0;
  std::string out = "drift.csv";
};

struct EvalOptions {
  WorldOptions world;
  std::string ckpt;
  std::string corpus;
  std::size_t max_length = kDefaultMaxLength;
  std::string out = "eval.csv";
};

void gen_data(const GenDataOptions& options);
void gen_counterfactuals(const GenCounterfactualsOptions& options);
void train(const TrainOptions& options);
void monitor(const MonitorOptions& options);
void eval(const EvalOptions& options);

}  // namespace cpo::cli
