// Serial reference against the OpenMP kernels.
//
//   bench_kernels --benchmark_filter=transport

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "delaylab/kernels.hpp"
#include "delaylab/population.hpp"

using namespace delaylab;
using kernels::Execution;

namespace {

std::vector<double> filled(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(gen);
  return v;
}

Execution tag(const benchmark::State& state) {
  return state.range(1) == 0 ? Execution::serial : Execution::parallel;
}

void set_label(benchmark::State& state) { state.SetLabel(state.range(1) == 0 ? "serial" : "omp"); }

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n * n, -1, 1, 1), b = filled(n * n, -1, 1, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    kernels::matmul(tag(state), a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
  set_label(state);
}
BENCHMARK(BM_Matmul)->ArgsProduct({{64, 256, 512}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_TransportStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto cur = filled(n, 0, 1, 1), del = filled(n, 0, 1, 2), surv = filled(n, 0.9, 1, 3);
  const auto alpha = filled(n, 0, 1, 4);
  std::vector<double> out(n);
  const kernels::TransportStepArgs args{cur, del, surv, alpha, {}, {}, 0.01};
  for (auto _ : state) {
    kernels::transport_step(tag(state), args, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
  set_label(state);
}
BENCHMARK(BM_TransportStep)->ArgsProduct({{1 << 12, 1 << 16, 1 << 20}, {0, 1}});

void BM_WeightedDoubleSum(benchmark::State& state) {
  const std::size_t rows = 101, cols = static_cast<std::size_t>(state.range(0));
  const auto rw = filled(rows, 0, 1, 1), cw = filled(cols, 0, 1, 2);
  const auto beta = filled(rows * cols, 0, 1, 3), w = filled(rows * cols, 0, 1, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::weighted_double_sum(tag(state), rw, cw, beta, w, rows, cols, 17));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * cols));
  set_label(state);
}
BENCHMARK(BM_WeightedDoubleSum)->ArgsProduct({{1000, 10000, 100000}, {0, 1}});

void BM_PopulationStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ModelSpec s;
  s.a_max = 30.0;
  s.n_age = n;
  s.r = 30.0 / static_cast<double>(n) * 50.0;
  s.mu.assign(n + 1, 1.0);
  s.alpha.assign(n + 1, 0.25);
  s.law = BirthLaw::distributed;
  s.beta1 = Matrix(51, n + 1);
  for (double& x : s.beta1.data()) x = 2.0 / s.r;
  const auto model = build_model(s);
  PopulationState st = initial_state(model, [](double, double a) { return std::exp(-a); });
  for (auto _ : state) step(model, st, nullptr, tag(state));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
  set_label(state);
}
BENCHMARK(BM_PopulationStep)->ArgsProduct({{3000, 30000, 300000}, {0, 1}});

}  // namespace

BENCHMARK_MAIN();
