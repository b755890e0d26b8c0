// Parallel kernels against the serial reference implementation.

#include <benchmark/benchmark.h>

#include "knnloo/regress.hpp"
#include "knnloo/spectral.hpp"
#include "reference.hpp"

using namespace knnloo;

namespace {

Dataset make_data(std::size_t n, std::size_t d) {
  SyntheticSpec spec{.n = n, .d = d, .noise_sd = 1.0, .seed = 7};
  return generate_synthetic(spec).data;
}

void BM_build_table(benchmark::State& state) {
  const Dataset data = make_data(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(build_table(data, data.size() - 1, TieRule{}));
}

void BM_naive_table(benchmark::State& state) {
  const Dataset data = make_data(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::naive_table(data, data.size() - 1, TieRule{}));
  }
}

void BM_loocv_streaming(benchmark::State& state) {
  const Dataset data = make_data(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(loocv_curve(data, data.size() - 1, TieRule{}));
}

void BM_naive_curve(benchmark::State& state) {
  const Dataset data = make_data(static_cast<std::size_t>(state.range(0)), 3);
  const NeighborTable table = build_table(data, data.size() - 1, TieRule{});
  for (auto _ : state) benchmark::DoNotOptimize(reference::naive_curve(data, table));
}

void BM_build_a(benchmark::State& state) {
  const Dataset data = make_data(static_cast<std::size_t>(state.range(0)), 3);
  const NeighborTable table = build_table(data, 32, TieRule{});
  for (auto _ : state) benchmark::DoNotOptimize(build_a(build_b(table, 32)));
}

void BM_dense_a(benchmark::State& state) {
  const Dataset data = make_data(static_cast<std::size_t>(state.range(0)), 3);
  const NeighborTable table = build_table(data, 32, TieRule{});
  for (auto _ : state) benchmark::DoNotOptimize(reference::dense_a(table, 32));
}

}  // namespace

BENCHMARK(BM_build_table)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_naive_table)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_loocv_streaming)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_naive_curve)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_build_a)->Arg(250)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_dense_a)->Arg(250)->Arg(500)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
