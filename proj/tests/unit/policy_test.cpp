#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cpo/policy.hpp"
#include "support/expect.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace cpo {
namespace {

Vocab eight_token_vocab() {
  return Vocab({"<pad>", "<think>", "</think>", "<eos>", "left", "right", "alpha", "beta"},
               {"alpha", "beta"});
}

double log_sum_exp(const std::vector<double>& logp) {
  double total = 0.0;
  for (double x : logp) total += std::exp(x);
  return total;
}

TEST(Policy, ZeroParamsAreUniform) {
  const Vocab v = eight_token_vocab();
  const PolicyParams zero(v.size(), PolicyHyper{});
  const auto logp = log_softmax(logits(zero, window_of({}, zero.hyper().context_window)));
  for (double x : logp) EXPECT_NEAR(x, -2.0794415416798357, 1e-12);
  EXPECT_NEAR(-std::log(8.0), -2.0794, 1e-4);
}

TEST(Policy, ThreeTokenBodyUnderUniformPolicy) {
  const Vocab v = eight_token_vocab();
  const PolicyParams zero(v.size(), PolicyHyper{});
  const Trajectory t{{v.id("left")}, {}, v.label_of("beta")};
  ASSERT_EQ(t.body(v).size(), 3u);
  EXPECT_NEAR(sequence_logprob(zero, t, v), -6.2383246250395068, 1e-12);
  EXPECT_EQ(sequence_logprob(zero, std::vector<TokenId>{v.id("left")}, {}), 0.0);
}

TEST(Policy, WindowIsLeftPadded) {
  const TokenSeq history = {5, 6, 7};
  EXPECT_EQ(window_of(history, 5), (TokenSeq{0, 0, 5, 6, 7}));
  EXPECT_EQ(window_of(history, 2), (TokenSeq{6, 7}));
}

TEST(Policy, ShapeMismatch) {
  const Vocab v = eight_token_vocab();
  const PolicyParams p(v.size(), PolicyHyper{});
  EXPECT_CPO_ERROR(logits(p, TokenSeq{1, 2}), ErrorCode::kShapeMismatch);
  EXPECT_CPO_ERROR(logits(p, TokenSeq(8, 99)), ErrorCode::kShapeMismatch);
}

TEST(PolicyProperty, SoftmaxNormalizesAndMatchesOracle) {
  Rng rng(0x510e527f);
  for (int trial = 0; trial < 100; ++trial) {
    const auto graph = testing::random_graph(rng);
    const Vocab vocab = Vocab::from_graph(graph);
    const auto params = testing::random_policy(vocab, rng.next(), testing::tiny_hyper(), 2.0);
    const TokenSeq window = window_of(testing::random_context(rng, vocab, 6), 3);
    const auto scores = logits(params, window);
    const auto oracle = testing::oracle_logits(params, window);
    for (std::size_t i = 0; i < scores.size(); ++i) EXPECT_NEAR(scores[i], oracle[i], 1e-12);
    EXPECT_NEAR(log_sum_exp(log_softmax(scores)), 1.0, 1e-12);
  }
}

TEST(PolicyProperty, SequenceLogprobMatchesPerPositionOracle) {
  Rng rng(0x9b05688c);
  for (int trial = 0; trial < 100; ++trial) {
    const auto graph = testing::random_graph(rng);
    const Vocab vocab = Vocab::from_graph(graph);
    const auto params = testing::random_policy(vocab, rng.next());
    const TokenSeq prefix = testing::random_context(rng, vocab);
    const TokenSeq targets = testing::random_context(rng, vocab, 5);
    EXPECT_NEAR(sequence_logprob(params, prefix, targets),
                testing::oracle_sequence_logprob(params, prefix, targets), 1e-10);
    const auto t = testing::random_factual(rng, graph, vocab, testing::random_entity(rng, graph),
                                           prefix);
    EXPECT_NEAR(sequence_logprob(params, t, vocab),
                testing::oracle_trajectory_logprob(params, t, vocab), 1e-10);
  }
}

TEST(Policy, UniformPolicyIgnoresTokenOrder) {
  const Vocab v = eight_token_vocab();
  const PolicyParams zero(v.size(), PolicyHyper{});
  const TokenSeq a = {v.id("left"), v.id("right")};
  const TokenSeq b = {v.id("right"), v.id("left")};
  EXPECT_EQ(sequence_logprob(zero, {}, a), sequence_logprob(zero, {}, b));

  const auto params = testing::random_policy(v, 3);
  EXPECT_NE(sequence_logprob(params, {}, a), sequence_logprob(params, {}, b));
}

class PolicyBackward : public ::testing::Test {
 protected:
  ConceptGraph graph;
  std::unique_ptr<Vocab> vocab;

  void SetUp() override {
    Rng rng(17);
    graph = testing::random_graph(rng, {3, 3, 4, 4});
    vocab = std::make_unique<Vocab>(Vocab::from_graph(graph));
  }
};

TEST_F(PolicyBackward, ZeroUpstreamGivesZeroGradient) {
  const auto params = testing::random_policy(*vocab, 5);
  const auto t = render_trajectory({}, *graph.entities().begin(), *vocab);
  const auto g = backward(params, t, *vocab, 0.0);
  for (double x : g.flat()) EXPECT_EQ(x, 0.0);
}

TEST_F(PolicyBackward, MatchesCentralDifferences) {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const auto params = testing::random_policy(*vocab, rng.next());
    const auto t = testing::random_factual(rng, graph, *vocab, testing::random_entity(rng, graph),
                                           testing::random_context(rng, *vocab));
    const double weight = rng.uniform(-2.0, 2.0);
    const auto analytic = backward(params, t, *vocab, weight);
    const auto numeric = testing::central_difference(
        [&](const PolicyParams& p) { return weight * sequence_logprob(p, t, *vocab); }, params);
    EXPECT_LT(testing::compare_gradients(analytic.flat(), numeric).max_relative, 1e-5);
  }
}

TEST_F(PolicyBackward, UnseenTokenEmbeddingRowIsZero) {
  const auto params = testing::random_policy(*vocab, 8);
  const std::string entity = *graph.entities().begin();
  const auto t = render_trajectory({}, entity, *vocab);
  const auto g = backward(params, t, *vocab, 1.0);
  const TokenId unseen = vocab->id("no");
  const std::size_t de = params.hyper().embed_dim;
  for (std::size_t j = 0; j < de; ++j) EXPECT_EQ(g.embedding()[unseen * de + j], 0.0);
}

struct SmallWorld {
  ConceptGraph graph;
  Vocab vocab;
  PolicyParams params;
};

SmallWorld small_world() {
  Rng rng(99);
  auto graph = testing::random_graph(rng, {4, 4, 6, 6});
  Vocab vocab = Vocab::from_graph(graph);
  auto params = init_policy(vocab.size(), PolicyHyper{4, 6, 8}, 12, 0.8);
  return {std::move(graph), std::move(vocab), std::move(params)};
}

class Sampling : public ::testing::Test {
 protected:
  SmallWorld world = small_world();
};

TEST_F(Sampling, OutputIsWellFormedAndSeedDeterministic) {
  const Vocab& v = world.vocab;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SampleOptions options;
    options.seed = seed;
    options.max_length = 12;
    const auto t = sample(world.params, v, {v.id("no")}, options);
    const auto raw = t.raw(v);
    EXPECT_LE(raw.size(), options.max_length);
    EXPECT_EQ(parse_trajectory(raw, v, t.context, options.max_length), t);
    EXPECT_EQ(sample(world.params, v, {v.id("no")}, options), t);
  }
}

TEST_F(Sampling, TightLengthForcesCompletion) {
  const Vocab& v = world.vocab;
  SampleOptions options;
  options.max_length = 4;
  const auto t = sample(world.params, v, {}, options);
  EXPECT_TRUE(t.thinking.empty());
  EXPECT_EQ(t.raw(v).size(), 4u);
}

TEST_F(Sampling, GreedyIgnoresSeed) {
  SampleOptions a;
  a.greedy = true;
  a.seed = 1;
  SampleOptions b = a;
  b.seed = 77;
  EXPECT_EQ(sample(world.params, world.vocab, {}, a), sample(world.params, world.vocab, {}, b));
}

TEST_F(Sampling, ContinuationsAgreeOnceHistoriesAgree) {
  const Vocab& v = world.vocab;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SampleOptions options;
    options.seed = seed;
    const auto full = sample(world.params, v, {}, options);
    for (std::size_t cut = 0; cut <= full.thinking.size(); ++cut) {
      TokenSeq prefix = {v.think()};
      prefix.insert(prefix.end(), full.thinking.begin(),
                    full.thinking.begin() + static_cast<std::ptrdiff_t>(cut));
      EXPECT_EQ(continue_from(world.params, v, {}, prefix, options), full);
    }
  }
}

TEST(Checkpoint, RoundTripAndVocabCheck) {
  const Vocab v = eight_token_vocab();
  const auto params = init_policy(v.size(), PolicyHyper{2, 3, 4}, 4);
  const auto path = std::filesystem::temp_directory_path() / "cpo_policy_test.ckpt";
  save_checkpoint(path.string(), params, v);
  const auto loaded = load_checkpoint(path.string(), &v);
  EXPECT_EQ(loaded.params, params);
  EXPECT_EQ(loaded.vocab, v);

  const Vocab other({"<pad>", "<think>", "</think>", "<eos>", "alpha"}, {"alpha"});
  EXPECT_CPO_ERROR(load_checkpoint(path.string(), &other), ErrorCode::kVocabMismatch);

  std::ofstream(path, std::ios::binary) << "not a checkpoint";
  EXPECT_TRUE(testing::thrown_code([&] { load_checkpoint(path.string()); }).has_value());
  std::filesystem::remove(path);
  EXPECT_CPO_ERROR(load_checkpoint(path.string()), ErrorCode::kIo);
}

TEST(Init, SeededAndBounded) {
  const auto a = init_policy(10, PolicyHyper{}, 5);
  EXPECT_EQ(a, init_policy(10, PolicyHyper{}, 5));
  EXPECT_NE(a, init_policy(10, PolicyHyper{}, 6));
  for (double x : a.flat()) EXPECT_LE(std::abs(x), 0.05);
}

}  // namespace
}  // namespace cpo
