#include <benchmark/benchmark.h>

#include <vector>

#include "rank_reward/perception_metrics.hpp"
#include "rank_reward/random.hpp"

using namespace rank_reward;

namespace {

BBox box(Rng& rng) {
  const double x = rng.uniform(0, 500), y = rng.uniform(0, 500);
  return {x, y, x + rng.uniform(10, 100), y + rng.uniform(10, 100)};
}

}  // namespace

static void BM_MatchObjects(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<ObjectPrediction> preds;
  GroundTruth gt;
  for (std::size_t i = 0; i < n; ++i) {
    preds.push_back({box(rng), {0, 0}});
    gt.boxes.push_back(box(rng));
    gt.points.push_back({0, 0});
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::match_objects(preds, gt));
}
BENCHMARK(BM_MatchObjects)->Arg(2)->Arg(6)->Arg(16)->Arg(64);

static void BM_AccuracyVector(benchmark::State& state) {
  Rng rng(4);
  AnswerPayload pred;
  GroundTruth gt;
  for (int i = 0; i < 6; ++i) {
    pred.objects.push_back({box(rng), {rng.uniform(0, 500), rng.uniform(0, 500)}});
    gt.boxes.push_back(box(rng));
    gt.points.push_back({rng.uniform(0, 500), rng.uniform(0, 500)});
  }
  const metrics::DistanceThresholds thr;
  for (auto _ : state) benchmark::DoNotOptimize(metrics::accuracy_vector(pred, gt, thr));
}
BENCHMARK(BM_AccuracyVector);
