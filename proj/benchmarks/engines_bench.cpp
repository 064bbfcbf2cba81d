#include <benchmark/benchmark.h>

#include <array>

#include "imbp/continuous_engine.hpp"
#include "imbp/discrete_engine.hpp"
#include "imbp/levy_paths.hpp"
#include "imbp/scaling_harness.hpp"
#include "imbp/stats.hpp"

using namespace imbp;

namespace {

DiscreteModelSpec critical_binary(double competition) {
  DiscreteModelSpec s;
  s.d = 1;
  s.lambda = {1.0};
  s.offspring = {{{{0}, 0.5}, {{2}, 0.5}}};
  s.interaction = Matrix::Constant(1, 1, competition);
  return s;
}

DiscreteModelSpec two_type() {
  DiscreteModelSpec s;
  s.d = 2;
  s.lambda = {1.0, 0.8};
  s.offspring = {{{{0, 0}, 0.3}, {{2, 0}, 0.4}, {{1, 1}, 0.3}}, {{{0, 0}, 0.5}, {{0, 2}, 0.5}}};
  s.interaction = Matrix::Zero(2, 2);
  s.interaction(0, 1) = -0.5;
  s.interaction(1, 0) = 0.2;
  return s;
}

ContinuousModelSpec logistic_diffusion() {
  ContinuousModelSpec s;
  s.d = 1;
  s.B = Matrix::Constant(1, 1, 1.0);
  s.C = Matrix::Constant(1, 1, -1.0);
  s.sigma = {0.1};
  s.jump_measures.resize(1);
  return s;
}

void BM_Gillespie(benchmark::State& state) {
  const auto spec = critical_binary(0.0);
  const IntVec z{state.range(0)};
  RandomStream rng(1);
  std::int64_t events = 0;
  for (auto _ : state) {
    auto run = simulate_gillespie(spec, z, 1.0, rng);
    events += static_cast<std::int64_t>(run.path.breakpoints.size());
    benchmark::DoNotOptimize(run.path.final_state());
  }
  state.counters["events/s"] = benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Gillespie)->Arg(10)->Arg(100)->Arg(1000);

void BM_GillespieAggregated(benchmark::State& state) {
  const double n = static_cast<double>(state.range(0));
  const auto spec = critical_binary(-1.0 / (n * n));
  const IntVec z{state.range(0)};
  const std::array<double, 1> t{n};
  RandomStream rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(gillespie_at_aggregated(spec, z, t, rng));
}
BENCHMARK(BM_GillespieAggregated)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_TimeChange(benchmark::State& state) {
  const auto spec = two_type();
  const IntVec z{state.range(0), state.range(0)};
  const auto walks = walk_specs_from_model(spec);
  RandomStream rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_time_change(spec, z, 1.0, walks, rng).final_state());
}
BENCHMARK(BM_TimeChange)->Arg(5)->Arg(50);

void BM_Euler(benchmark::State& state) {
  const auto spec = logistic_diffusion();
  EulerConfig cfg;
  cfg.dt = 1.0 / static_cast<double>(state.range(0));
  const RealVec y{0.5};
  const std::array<double, 1> t{1.0};
  RandomStream rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(euler_at(spec, y, t, cfg, rng));
}
BENCHMARK(BM_Euler)->Arg(1000)->Arg(10000);

void BM_Uniformization(benchmark::State& state) {
  const auto spec = two_type();
  for (auto _ : state) benchmark::DoNotOptimize(transient_distribution(spec, {1, 1}, 1.0, state.range(0)).leak);
}
BENCHMARK(BM_Uniformization)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
