#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "cpo/error.hpp"

namespace {

enum ExitCode : int { kOk = 0, kInternal = 1, kInput = 2, kNumeric = 3, kArtifact = 4 };

int exit_code_for(cpo::ErrorCode code) {
  switch (code) {
    case cpo::ErrorCode::kNonFiniteLoss:
      return kNumeric;
    case cpo::ErrorCode::kVocabMismatch:
    case cpo::ErrorCode::kShapeMismatch:
      return kArtifact;
    default:
      return kInput;
  }
}

void add_world(CLI::App& command, cpo::cli::WorldOptions& world, bool generation) {
  command.add_option("--graph", world.graph, "Concept graph JSON (default: built-in demo world)")
      ->check(CLI::ExistingFile);
  if (!generation) return;
  command.add_option("--regimes", world.regimes, "Number of label regimes")
      ->check(CLI::PositiveNumber);
  command.add_option("--shift-tv", world.shift_tv, "TV distance between consecutive regimes")
      ->check(CLI::Range(0.0, 1.0));
  command.add_option("--cue-rate", world.cue_rate)->check(CLI::Range(0.0, 1.0));
  command.add_option("--mention-rate", world.mention_rate)->check(CLI::Range(0.0, 1.0));
  command.add_option("--negation-rate", world.negation_rate)->check(CLI::Range(0.0, 1.0));
  command.add_option("--attribute-noise", world.attribute_noise)->check(CLI::Range(0.0, 1.0));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual preference optimization toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cpo 0.1.0");

  cpo::cli::GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Sample a synthetic diagnosis corpus");
  add_world(*gen_cmd, gen.world, true);
  gen_cmd->add_option("-n,--n", gen.n, "Number of records");
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("-o,--out", gen.out);

  cpo::cli::GenCounterfactualsOptions cf;
  auto* cf_cmd =
      app.add_subcommand("gen-counterfactuals", "Build preference pairs from a sample corpus");
  add_world(*cf_cmd, cf.world, false);
  cf_cmd->add_option("--samples", cf.samples)->required()->check(CLI::ExistingFile);
  cf_cmd->add_option("--targets", cf.targets,
                     "all: one pair per valid target; sampled: one per record")
      ->check(CLI::IsMember({"all", "sampled"}));
  cf_cmd->add_option("--seed", cf.seed);
  cf_cmd->add_option("-o,--out", cf.out);

  cpo::cli::TrainOptions tr;
  auto* tr_cmd = app.add_subcommand("train", "Supervised or preference training");
  add_world(*tr_cmd, tr.world, false);
  tr_cmd->add_option("--mode", tr.mode)->required()->check(CLI::IsMember({"sft", "cpo"}));
  tr_cmd->add_option("--config", tr.config, "JSON optimizer config; flags win")
      ->check(CLI::ExistingFile);
  tr_cmd->add_option("--resume", tr.resume, "Starting checkpoint")->check(CLI::ExistingFile);
  tr_cmd->add_option("--ref", tr.ref, "Frozen reference checkpoint (cpo)")
      ->check(CLI::ExistingFile);
  tr_cmd->add_option("--samples", tr.samples, "Sample corpus (sft)")->check(CLI::ExistingFile);
  tr_cmd->add_option("--pairs", tr.pairs, "Pair corpus (cpo)")->check(CLI::ExistingFile);
  tr_cmd->add_option("--steps", tr.steps);
  tr_cmd->add_option("--lr", tr.learning_rate);
  tr_cmd->add_option("--beta", tr.beta);
  tr_cmd->add_option("--batch-size", tr.batch_size);
  tr_cmd->add_option("--context-window", tr.hyper.context_window)->check(CLI::PositiveNumber);
  tr_cmd->add_option("--embed-dim", tr.hyper.embed_dim)->check(CLI::PositiveNumber);
  tr_cmd->add_option("--hidden-dim", tr.hyper.hidden_dim)->check(CLI::PositiveNumber);
  tr_cmd->add_option("--seed", tr.seed);
  tr_cmd->add_option("-o,--out", tr.out);
  tr_cmd->add_option("--metrics", tr.metrics, "Metric CSV (default: <out>.metrics.csv)");

  cpo::cli::MonitorOptions mon;
  auto* mon_cmd = app.add_subcommand("monitor", "Per-position drift traces of thinking streams");
  add_world(*mon_cmd, mon.world, false);
  mon_cmd->add_option("--ckpt", mon.ckpt)->required()->check(CLI::ExistingFile);
  mon_cmd->add_option("--corpus", mon.corpus)->required()->check(CLI::ExistingFile);
  mon_cmd->add_option("--threshold", mon.threshold);
  mon_cmd->add_option("--source", mon.source,
                      "corpus: monitor the stored reports; policy: the greedy decode")
      ->check(CLI::IsMember({"corpus", "policy"}));
  mon_cmd->add_option("--estimator", mon.estimator,
                      "rollout: sampled continuations; exact: forced </think> read-out")
      ->check(CLI::IsMember({"exact", "rollout"}));
  mon_cmd->add_option("--rollouts", mon.rollouts)->check(CLI::PositiveNumber);
  mon_cmd->add_option("--seed", mon.seed);
  mon_cmd->add_option("-o,--out", mon.out);

  cpo::cli::EvalOptions ev;
  auto* ev_cmd = app.add_subcommand("eval", "Top-1 accuracy and text metrics");
  add_world(*ev_cmd, ev.world, false);
  ev_cmd->add_option("--ckpt", ev.ckpt)->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--corpus", ev.corpus)->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--max-length", ev.max_length);
  ev_cmd->add_option("-o,--out", ev.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*gen_cmd) cpo::cli::gen_data(gen);
    if (*cf_cmd) cpo::cli::gen_counterfactuals(cf);
    if (*tr_cmd) cpo::cli::train(tr);
    if (*mon_cmd) cpo::cli::monitor(mon);
    if (*ev_cmd) cpo::cli::eval(ev);
  } catch (const cpo::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}
