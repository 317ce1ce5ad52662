#include "rank_reward/perception_metrics.hpp"

#include <algorithm>
#include <cmath>

#include "rank_reward/assignment.hpp"
#include "rank_reward/errors.hpp"

namespace rank_reward::metrics {

void DistanceThresholds::validate() const {
  if (!(std::isfinite(tau_min) && std::isfinite(tau_max))) {
    throw ConfigError("distance thresholds must be finite");
  }
  if (!(0.0 <= tau_min && tau_min < tau_max)) {
    throw ConfigError("distance thresholds require 0 <= tau_min < tau_max");
  }
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return a == b ? 1.0 : 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<MatchPair> match_objects(std::span<const ObjectPrediction> preds,
                                     const GroundTruth& gt) {
  const std::size_t n_pred = preds.size();
  const std::size_t n_gt = gt.boxes.size();
  const std::size_t n = std::max(n_pred, n_gt);
  std::vector<MatchPair> pairs;
  if (n_pred == 0 || n_gt == 0) return pairs;

  // Pad to a square problem with zero-weight dummies; a prediction assigned
  // to a dummy column is unmatched.
  WeightMatrix weights(n, n, 0.0);
  for (std::size_t i = 0; i < n_pred; ++i) {
    for (std::size_t j = 0; j < n_gt; ++j) {
      weights(i, j) = iou(preds[i].bbox, gt.boxes[j]);
    }
  }
  const auto assignment = canonical_max_weight_assignment(weights);
  for (std::size_t i = 0; i < n_pred; ++i) {
    const std::size_t j = assignment.row_to_col[i];
    if (j < n_gt) pairs.push_back({i, j});
  }
  return pairs;
}

double soft_distance(double distance, const DistanceThresholds& thr) {
  if (distance <= thr.tau_min) return 1.0;
  if (distance >= thr.tau_max) return 0.0;
  return (thr.tau_max - distance) / (thr.tau_max - thr.tau_min);
}

double count_consistency(std::size_t n_pred, std::size_t n_gt) {
  const std::size_t hi = std::max(n_pred, n_gt);
  if (hi == 0) return 1.0;
  return static_cast<double>(std::min(n_pred, n_gt)) / static_cast<double>(hi);
}

AccuracyVector accuracy_vector(const AnswerPayload& pred, const GroundTruth& gt,
                               const DistanceThresholds& thr) {
  if (gt.boxes.size() != gt.points.size()) {
    throw LengthMismatchError("ground truth needs one point per box");
  }
  const std::size_t n_pred = pred.objects.size();
  const std::size_t n_gt = gt.boxes.size();
  const double denom = static_cast<double>(std::max<std::size_t>({n_pred, n_gt, 1}));

  double iou_sum = 0.0;
  double point_sum = 0.0;
  for (const auto& [i, j] : match_objects(pred.objects, gt)) {
    iou_sum += iou(pred.objects[i].bbox, gt.boxes[j]);
    const double dx = pred.objects[i].point.x - gt.points[j].x;
    const double dy = pred.objects[i].point.y - gt.points[j].y;
    point_sum += soft_distance(std::hypot(dx, dy), thr);
  }
  AccuracyVector x;
  x.x1 = std::clamp(iou_sum / denom, 0.0, 1.0);
  x.x2 = count_consistency(n_pred, n_gt);
  x.x3 = std::clamp(point_sum / denom, 0.0, 1.0);
  return x;
}

double giou_eval(std::span<const AnswerPayload> preds,
                 std::span<const GroundTruth> gts) {
  if (preds.size() != gts.size()) {
    throw LengthMismatchError("giou_eval: predictions and ground truths differ in length");
  }
  double iou_sum = 0.0;
  std::size_t objects = 0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    objects += gts[s].boxes.size();
    for (const auto& [i, j] : match_objects(preds[s].objects, gts[s])) {
      iou_sum += iou(preds[s].objects[i].bbox, gts[s].boxes[j]);
    }
  }
  return objects == 0 ? 0.0 : iou_sum / static_cast<double>(objects);
}

EvalReport evaluate_predictions(std::span<const AnswerPayload> preds,
                                std::span<const GroundTruth> gts,
                                const DistanceThresholds& thr) {
  EvalReport report;
  report.giou = giou_eval(preds, gts);
  report.per_scene.reserve(preds.size());
  std::size_t count_hits = 0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto x = accuracy_vector(preds[s], gts[s], thr);
    report.mean_accuracy.x1 += x.x1;
    report.mean_accuracy.x2 += x.x2;
    report.mean_accuracy.x3 += x.x3;
    if (preds[s].objects.size() == gts[s].boxes.size()) ++count_hits;
    report.per_scene.push_back(x);
  }
  if (!preds.empty()) {
    const double n = static_cast<double>(preds.size());
    report.mean_accuracy.x1 /= n;
    report.mean_accuracy.x2 /= n;
    report.mean_accuracy.x3 /= n;
    report.count_accuracy = static_cast<double>(count_hits) / n;
  }
  return report;
}

}  // namespace rank_reward::metrics
