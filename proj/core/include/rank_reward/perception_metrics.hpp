#pragma once

#include <array>
#include <span>
#include <vector>

#include "rank_reward/geometry.hpp"

namespace rank_reward::metrics {

/// Soft point-distance ramp bounds in pixels, 0 <= tau_min < tau_max.
struct DistanceThresholds {
  double tau_min = 30.0;
  double tau_max = 200.0;

  /// Throws ConfigError when the bounds are out of order or negative.
  void validate() const;
};

/// Raw accuracy vector: box IoU term, count consistency, point term.
struct AccuracyVector {
  double x1 = 0.0;
  double x2 = 0.0;
  double x3 = 0.0;

  std::array<double, 3> as_array() const { return {x1, x2, x3}; }
  friend bool operator==(const AccuracyVector&, const AccuracyVector&) = default;
};

struct MatchPair {
  std::size_t pred = 0;
  std::size_t gt = 0;

  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

/// Intersection over union. Two degenerate (zero-area) boxes score 1 when
/// identical and 0 otherwise.
double iou(const BBox& a, const BBox& b);

/// One-to-one assignment of predictions to ground-truth boxes with maximal
/// total IoU and exactly min(N_pre, N_gt) pairs, sorted by prediction index.
/// Ties resolve to the lexicographically smallest gt index per prediction.
std::vector<MatchPair> match_objects(std::span<const ObjectPrediction> preds,
                                     const GroundTruth& gt);

/// 1 up to tau_min, linear ramp to 0 at tau_max, 0 beyond.
double soft_distance(double distance, const DistanceThresholds& thr);

/// Count consistency min/max, defined as 1 when both counts are zero.
double count_consistency(std::size_t n_pred, std::size_t n_gt);

/// Unmatched objects contribute 0 to the x1 and x3 sums, which are divided by
/// max(N_pre, N_gt, 1).
AccuracyVector accuracy_vector(const AnswerPayload& pred, const GroundTruth& gt,
                               const DistanceThresholds& thr);

/// Mean over all ground-truth objects of the IoU with their assigned
/// prediction (0 when unassigned). Returns 0 when there are no objects.
/// Throws LengthMismatchError when the spans differ in length.
double giou_eval(std::span<const AnswerPayload> preds,
                 std::span<const GroundTruth> gts);

struct EvalReport {
  double giou = 0.0;
  AccuracyVector mean_accuracy;
  /// Fraction of scenes whose predicted object count equals the GT count.
  double count_accuracy = 0.0;
  std::vector<AccuracyVector> per_scene;
};

/// giou_eval plus per-scene accuracy vectors and their means.
EvalReport evaluate_predictions(std::span<const AnswerPayload> preds,
                                std::span<const GroundTruth> gts,
                                const DistanceThresholds& thr);

}  // namespace rank_reward::metrics
