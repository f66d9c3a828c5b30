#include <benchmark/benchmark.h>

#include "focus/config.hpp"
#include "focus/model.hpp"
#include "focus/prioritize.hpp"
#include "focus/redundancy.hpp"
#include "focus/rng.hpp"
#include "focus/seqcompress.hpp"

using namespace focus;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = rng.normal();
  return m;
}

void BM_Redundancy(benchmark::State& state, Execution exec) {
  const Matrix x = random_matrix(static_cast<std::size_t>(state.range(0)), 512, 1);
  for (auto _ : state) benchmark::DoNotOptimize(remove_global_redundancy_positions(x, 32, exec));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Prioritize(benchmark::State& state) {
  const std::size_t d = 512;
  const Matrix x = random_matrix(static_cast<std::size_t>(state.range(0)), d, 2);
  const Matrix prompts = random_matrix(9, d, 3);
  const Matrix eye = Matrix::identity(d);
  for (auto _ : state) {
    const auto scores = score_relevance(x, prompts, eye, eye);
    benchmark::DoNotOptimize(select_topk(scores, 0.8, 4096));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Sequential(benchmark::State& state) {
  const Matrix x = random_matrix(static_cast<std::size_t>(state.range(0)), 512, 4);
  const auto schedule = StageSchedule::linear(0.7, 0.05, 3);
  for (auto _ : state) benchmark::DoNotOptimize(compress_sequential_positions(x, schedule));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_TrainStep(benchmark::State& state) {
  RunConfig c;
  const std::size_t d = 64;
  FocusModel model(c, random_matrix(5, d, 5), 5, 6);
  FeatureBag bag;
  bag.features = random_matrix(static_cast<std::size_t>(state.range(0)), d, 7);
  for (std::size_t i = 0; i < bag.size(); ++i) bag.patch_indices.push_back(i);
  const PreparedBag prepared = model.prepare(bag);
  for (auto _ : state) {
    model.params().zero_grad();
    benchmark::DoNotOptimize(model.loss_and_grad(prepared, 1));
  }
}

}  // namespace

BENCHMARK_CAPTURE(BM_Redundancy, single, Execution::Sequential)
    ->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Redundancy, parallel, Execution::Parallel)
    ->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Prioritize)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Sequential)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainStep)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
