#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cpo/concept_graph.hpp"
#include "cpo/corpus.hpp"
#include "cpo/policy.hpp"
#include "cpo/trajectory.hpp"

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

class Cli : public ::testing::Test {
 protected:
  static fs::path dir;

  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / "cpo_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    ASSERT_EQ(run("gen-data -n 120 --seed 1 -o train.jsonl"), 0);
    ASSERT_EQ(run("gen-data -n 20 --seed 2 -o held.jsonl"), 0);
    ASSERT_EQ(run("gen-counterfactuals --samples train.jsonl --seed 3 -o pairs.jsonl"), 0);
    ASSERT_EQ(run("train --mode sft --samples train.jsonl --steps 10 --seed 4 -o sft.ckpt"), 0);
  }

  static void TearDownTestSuite() { fs::remove_all(dir); }

  static int run(const std::string& args) {
    const std::string command = "cd '" + dir.string() + "' && '" CPO_CLI_PATH "' " + args +
                                " > stdout.log 2> stderr.log";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string stderr_text() { return slurp(dir / "stderr.log"); }
};

fs::path Cli::dir;

TEST_F(Cli, HelpAndUnknownFlags) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("gen-data --bogus"), 2);
  EXPECT_EQ(run(""), 2);
}

TEST_F(Cli, MissingGraphIsAnInputError) {
  EXPECT_EQ(run("gen-data --graph absent.json -o x.jsonl"), 2);
}

TEST_F(Cli, MalformedGraphIsAnInputError) {
  std::ofstream(dir / "broken.json") << "{\"entities\": [";
  EXPECT_EQ(run("gen-data --graph broken.json -o x.jsonl"), 2);
}

TEST_F(Cli, CpoWithoutReferenceIsAConfigError) {
  EXPECT_EQ(run("train --mode cpo --pairs pairs.jsonl -o c.ckpt"), 2);
  EXPECT_NE(stderr_text().find("--ref"), std::string::npos) << stderr_text();
}

TEST_F(Cli, CheckpointForAnotherVocabularyIsAnArtifactMismatch) {
  cpo::ConceptGraph graph;
  graph.add_entity("left");
  graph.add_entity("right");
  graph.add_attribute("round", cpo::AttributeCategory::kMorphological);
  graph.set_relation("left", "round", cpo::RelationKind::kAssociation);
  std::ofstream(dir / "other.json") << cpo::serialize_graph(graph);
  ASSERT_EQ(run("gen-data --graph other.json -n 5 -o other.jsonl"), 0);
  EXPECT_EQ(run("eval --graph other.json --ckpt sft.ckpt --corpus other.jsonl -o e.csv"), 4);
  EXPECT_EQ(run("monitor --graph other.json --ckpt sft.ckpt --corpus other.jsonl -o m.csv"), 4);
}

TEST_F(Cli, DivergentTrainingIsANumericFailure) {
  EXPECT_EQ(run("train --mode sft --samples train.jsonl --steps 50 --lr 1e200 -o nan.ckpt"), 3);
}

TEST_F(Cli, EmptyCorpusCannotBeEvaluated) {
  std::ofstream(dir / "empty.jsonl").flush();
  EXPECT_EQ(run("eval --ckpt sft.ckpt --corpus empty.jsonl -o e.csv"), 2);
}

TEST_F(Cli, CorruptCorpusLineIsReported) {
  std::ofstream(dir / "corrupt.jsonl") << slurp(dir / "held.jsonl") << "not json\n";
  EXPECT_EQ(run("eval --ckpt sft.ckpt --corpus corrupt.jsonl -o e.csv"), 2);
  EXPECT_NE(stderr_text().find("21"), std::string::npos) << stderr_text();
}

TEST_F(Cli, ZeroStepsLeavesTheCheckpointUnchanged) {
  ASSERT_EQ(run("train --mode sft --samples train.jsonl --resume sft.ckpt --steps 0 -o same.ckpt"),
            0);
  const auto vocab = cpo::world_vocab(cpo::demo_world_spec());
  EXPECT_EQ(cpo::load_checkpoint((dir / "same.ckpt").string(), &vocab).params,
            cpo::load_checkpoint((dir / "sft.ckpt").string(), &vocab).params);
  ASSERT_EQ(run("train --mode cpo --ref sft.ckpt --pairs pairs.jsonl --steps 0 -o same_cpo.ckpt"),
            0);
  EXPECT_EQ(slurp(dir / "same_cpo.ckpt"), slurp(dir / "sft.ckpt"));
}

TEST_F(Cli, RunsWriteManifestsAndMetrics) {
  ASSERT_EQ(run("train --mode cpo --ref sft.ckpt --pairs pairs.jsonl --steps 5 -o cpo.ckpt"), 0);
  const auto metrics = slurp(dir / "cpo.ckpt.metrics.csv");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')),
            "step,mode,loss,margin,reward_diff,grad_norm,regime_id");
  const auto manifest = slurp(dir / "cpo.ckpt.manifest.json");
  EXPECT_NE(manifest.find("\"subcommand\": \"train\""), std::string::npos) << manifest;
  EXPECT_NE(manifest.find("fnv1a64"), std::string::npos);
}

TEST_F(Cli, OutputDirectoryComesFromTheEnvironment) {
  const std::string command = "cd '" + dir.string() + "' && CPO_OUTPUT_DIR=out '" CPO_CLI_PATH
                              "' gen-data -n 3 -o env.jsonl > /dev/null 2>&1";
  ASSERT_EQ(std::system(command.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "env.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "out" / "env.jsonl.manifest.json"));
}

TEST_F(Cli, ConfigFileIsOverriddenByFlags) {
  std::ofstream(dir / "opt.json") << "{\"steps\": 3, \"learning_rate\": 0.5}";
  ASSERT_EQ(run("train --mode sft --samples train.jsonl --config opt.json --lr 0.01 -o cfg.ckpt"),
            0);
  const auto manifest = slurp(dir / "cfg.ckpt.manifest.json");
  EXPECT_NE(manifest.find("\"steps\": 3"), std::string::npos) << manifest;
  EXPECT_NE(manifest.find("\"learning_rate\": 0.01"), std::string::npos) << manifest;
}

TEST_F(Cli, MonitorWritesOneRowPerTransition) {
  ASSERT_EQ(run("monitor --ckpt sft.ckpt --corpus held.jsonl --source corpus --estimator exact "
                "-o trace.csv"),
            0);
  const auto trace = slurp(dir / "trace.csv");
  EXPECT_EQ(trace.substr(0, trace.find('\n')), "record,position,tv,kl,token_logprob,flagged");
  EXPECT_GT(std::count(trace.begin(), trace.end(), '\n'), 20);
}

}  // namespace
