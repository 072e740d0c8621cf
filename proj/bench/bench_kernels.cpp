// Serial reference vs OpenMP kernels.
#include "cas/curricula.hpp"
#include "cas/harness.hpp"
#include "cas/metrics.hpp"
#include "cas/replay_dynamics.hpp"

#include <benchmark/benchmark.h>

using namespace cas;

namespace {

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

std::vector<GaussianMixture> stream_of(StreamKind kind) { return generate_stream(default_stream(kind)); }

MemoryState state_after(const std::vector<GaussianMixture>& targets, int days, int L = 10) {
  auto state = MemoryState::start(default_prior(targets), targets.front(), L);
  for (int n = 2; n <= days; ++n) state.incorporate(targets[static_cast<std::size_t>(n - 1)]);
  return state;
}

void BM_ForgettingRow(benchmark::State& st) {
  const auto targets = stream_of(StreamKind::rotating_dominance);
  const auto state = state_after(targets, 100);
  const ForgettingOptions opt{overall_moments(state.prior()), true};
  for (auto _ : st) benchmark::DoNotOptimize(forgetting_row(state, opt, mode(st)));
}
BENCHMARK(BM_ForgettingRow)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_ForgettingMatrix(benchmark::State& st) {
  const auto targets = stream_of(StreamKind::triangle);
  const auto prior = default_prior(targets);
  const ForgettingOptions opt{overall_moments(prior), true};
  for (auto _ : st) benchmark::DoNotOptimize(forgetting_matrix(prior, targets, 10, opt, mode(st)));
}
BENCHMARK(BM_ForgettingMatrix)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_FpResidual(benchmark::State& st) {
  const auto state = state_after(stream_of(StreamKind::rotating_dominance), 60);
  const auto pts = bulk_points(state.grid(), 0.45, 50, 1);
  for (auto _ : st) benchmark::DoNotOptimize(fp_residual(state.grid(), 0.45, pts, mode(st)));
}
BENCHMARK(BM_FpResidual)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_IntegrateSde(benchmark::State& st) {
  const auto state = state_after(stream_of(StreamKind::triangle), 100);
  SdeOptions opt;
  opt.n_paths = 1000;
  opt.steps = 200;
  opt.keep_paths = false;
  for (auto _ : st) benchmark::DoNotOptimize(integrate_sde(state.grid(), opt, mode(st)));
}
BENCHMARK(BM_IntegrateSde)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Sweep(benchmark::State& st) {
  RunConfig base;
  base.stream = default_stream(StreamKind::circular);
  for (auto _ : st) benchmark::DoNotOptimize(sweep(base, "L", {5, 8, 10, 15, 20, 30}, mode(st)));
}
BENCHMARK(BM_Sweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
