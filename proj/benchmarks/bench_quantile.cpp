#include <benchmark/benchmark.h>

#include <vector>

#include "rank_reward/quantile_service.hpp"
#include "rank_reward/random.hpp"

using namespace rank_reward;

// One map_vector call scans all three queues.
static void BM_MapVector(benchmark::State& state) {
  const auto capacity = static_cast<std::size_t>(state.range(0));
  quantile::MetricHistory h(3, capacity);
  Rng rng(1);
  std::vector<std::vector<double>> batch(capacity, std::vector<double>(3));
  for (auto& v : batch)
    for (auto& x : v) x = rng.uniform();
  h.push_step(batch);
  h.flush_step();
  const std::vector<double> x = {0.3, 0.5, 0.7};
  for (auto _ : state) benchmark::DoNotOptimize(h.map_vector(x));
}
BENCHMARK(BM_MapVector)->Arg(256)->Arg(2048)->Arg(16384);

// A training-sized step: 128 pushes and one flush.
static void BM_PushFlush(benchmark::State& state) {
  quantile::MetricHistory h(3, 2048);
  Rng rng(2);
  std::vector<std::vector<double>> batch(128, std::vector<double>(3));
  for (auto& v : batch)
    for (auto& x : v) x = rng.uniform();
  for (auto _ : state) {
    h.push_step(batch);
    h.flush_step();
  }
}
BENCHMARK(BM_PushFlush);
