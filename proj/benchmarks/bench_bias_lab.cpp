#include <benchmark/benchmark.h>

#include <string>

#include "rank_reward/bias_lab.hpp"

using namespace rank_reward;

static void BM_Simulate(benchmark::State& state) {
  lab::SimulationConfig cfg;
  cfg.samples = static_cast<std::size_t>(state.range(0));
  const auto specs = lab::default_scenario().components;
  for (auto _ : state) benchmark::DoNotOptimize(lab::simulate_components(specs, cfg));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * cfg.samples));
}
BENCHMARK(BM_Simulate)->Arg(1 << 16)->Arg(1 << 20)->Unit(benchmark::kMillisecond);

static void BM_GradientContributions(benchmark::State& state) {
  lab::SimulationConfig cfg;
  cfg.samples = 1 << 20;
  const auto samples = lab::simulate_components(lab::default_scenario().components, cfg);
  const auto mode = state.range(0) ? lab::Normalization::QuantileRanked : lab::Normalization::RawSum;
  for (auto _ : state) benchmark::DoNotOptimize(lab::gradient_contributions(samples, mode));
  state.SetLabel(std::string(lab::to_string(mode)));
}
BENCHMARK(BM_GradientContributions)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
