// Serial reference vs OpenMP kernels, plus the sharded Z estimator with and
// without the parallel reduction. Run with --benchmark_counters_tabular=true.

#include <benchmark/benchmark.h>

#include <vector>

#include "lars/acceptance.hpp"
#include "lars/distributions.hpp"
#include "lars/kernels.hpp"
#include "lars/rng.hpp"
#include "lars/z_estimator.hpp"

namespace {

using namespace lars;

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

template <auto Fn>
void bm_gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto k = static_cast<std::size_t>(state.range(2));
  const auto a = random_vec(m * k, 1), b = random_vec(k * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Fn(m, n, k, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * m * n * k * state.iterations(), benchmark::Counter::kIsRate, benchmark::Counter::kIs1000);
}

// shapes from the VAE: batch x 784 -> 300, 300 -> 300, 1024 x 16 -> 100
#define GEMM_SHAPES Args({128, 300, 784})->Args({128, 300, 300})->Args({1024, 100, 16})->Args({128, 784, 300})

BENCHMARK(bm_gemm<kernels::serial::gemm_nn>)->Name("gemm_nn/serial")->GEMM_SHAPES;
BENCHMARK(bm_gemm<kernels::parallel::gemm_nn>)->Name("gemm_nn/parallel")->GEMM_SHAPES;

template <auto Fn>
void bm_gemm_tn(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto k = static_cast<std::size_t>(state.range(2));
  const auto a = random_vec(m * k, 1), b = random_vec(m * n, 2);
  std::vector<double> c(k * n);
  for (auto _ : state) {
    Fn(m, n, k, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * m * n * k * state.iterations(), benchmark::Counter::kIsRate, benchmark::Counter::kIs1000);
}

BENCHMARK(bm_gemm_tn<kernels::serial::gemm_tn>)->Name("gemm_tn/serial")->GEMM_SHAPES;
BENCHMARK(bm_gemm_tn<kernels::parallel::gemm_tn>)->Name("gemm_tn/parallel")->GEMM_SHAPES;

void bm_mc_z(benchmark::State& state) {
  const StandardNormal pi(16);
  const AcceptanceNet acc(16, {100, 100});
  ParamStore params;
  Rng rng(3);
  acc.init(params, rng);
  McOptions opts;
  opts.block = 10'000;
  opts.parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(mc_estimate_Z(pi, acc, params, 100'000, 7, opts));
  state.counters["draws/s"] = benchmark::Counter(1e5 * state.iterations(), benchmark::Counter::kIsRate);
}
BENCHMARK(bm_mc_z)->Name("mc_estimate_Z/serial")->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_mc_z)->Name("mc_estimate_Z/parallel")->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
