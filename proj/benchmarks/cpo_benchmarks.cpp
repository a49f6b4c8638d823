#include <benchmark/benchmark.h>

#include "cpo/corpus.hpp"
#include "cpo/counterfactual.hpp"
#include "cpo/drift.hpp"
#include "cpo/objective.hpp"
#include "cpo/policy.hpp"

namespace {

using namespace cpo;

struct DemoFixture {
  WorldSpec spec = demo_world_spec();
  Vocab vocab = world_vocab(spec);
  std::vector<SampleRecord> records = generate_world(spec, 256, 1);
  PolicyParams policy;

  explicit DemoFixture(PolicyHyper hyper = {})
      : policy(init_policy(vocab.size(), hyper, 2, 0.1)) {}

  std::vector<Trajectory> trajectories() const {
    std::vector<Trajectory> out;
    for (const auto& r : records) out.push_back(r.trajectory);
    return out;
  }
};

const DemoFixture& demo() {
  static const DemoFixture fixture;
  return fixture;
}

void BM_Logits(benchmark::State& state) {
  const auto hyper = PolicyHyper{static_cast<std::size_t>(state.range(0)), 16, 64};
  const DemoFixture f(hyper);
  const auto window = window_of(f.records.front().trajectory.raw(f.vocab), hyper.context_window);
  for (auto _ : state) benchmark::DoNotOptimize(logits(f.policy, window));
}
BENCHMARK(BM_Logits)->Arg(8)->Arg(16);

void BM_TrajectoryLogprob(benchmark::State& state) {
  const auto& f = demo();
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& t = f.records[i++ % f.records.size()].trajectory;
    benchmark::DoNotOptimize(sequence_logprob(f.policy, t, f.vocab));
  }
}
BENCHMARK(BM_TrajectoryLogprob);

void BM_SftGrad(benchmark::State& state) {
  const auto& f = demo();
  const auto all = f.trajectories();
  const std::span<const Trajectory> batch(all.data(), static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sft_grad(f.policy, batch, f.vocab));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SftGrad)->Arg(1)->Arg(16);

void BM_CpoGrad(benchmark::State& state) {
  const auto& f = demo();
  const auto pairs = generate_pairs(f.spec.graph, f.vocab, f.trajectories(), 3);
  const std::span<const PreferencePair> batch(pairs.data(),
                                              static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cpo_grad(f.policy, f.policy, batch, f.vocab, 0.1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CpoGrad)->Arg(1)->Arg(16);

void BM_GeneratePairs(benchmark::State& state) {
  const auto& f = demo();
  const auto factuals = f.trajectories();
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_pairs(f.spec.graph, f.vocab, factuals, 5));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(factuals.size()));
}
BENCHMARK(BM_GeneratePairs);

void BM_BuildStreamExact(benchmark::State& state) {
  const auto& f = demo();
  const auto& t = f.records.front().trajectory;
  for (auto _ : state) benchmark::DoNotOptimize(build_stream(f.policy, f.vocab, t));
}
BENCHMARK(BM_BuildStreamExact);

void BM_BuildStreamRollout(benchmark::State& state) {
  const auto& f = demo();
  const auto& t = f.records.front().trajectory;
  const auto estimator = OutcomeEstimator::rollout(static_cast<std::size_t>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(build_stream(f.policy, f.vocab, t, estimator));
}
BENCHMARK(BM_BuildStreamRollout)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_GenerateWorld(benchmark::State& state) {
  const auto& f = demo();
  for (auto _ : state) benchmark::DoNotOptimize(generate_world(f.spec, 1000, 9));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_GenerateWorld);

}  // namespace

BENCHMARK_MAIN();
