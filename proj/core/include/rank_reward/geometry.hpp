#pragma once

#include <vector>

namespace rank_reward {

/// Axis-aligned box in pixel coordinates, x1 <= x2 and y1 <= y2.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const { return x1 <= x2 && y1 <= y2; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// One predicted object: every prediction carries both a box and a point.
struct ObjectPrediction {
  BBox bbox;
  Point point;

  friend bool operator==(const ObjectPrediction&, const ObjectPrediction&) = default;
};

/// Validated content of an answer block. An empty list means "nothing found".
struct AnswerPayload {
  std::vector<ObjectPrediction> objects;

  friend bool operator==(const AnswerPayload&, const AnswerPayload&) = default;
};

/// Ground-truth objects of one scene; points[k] belongs to boxes[k].
struct GroundTruth {
  std::vector<BBox> boxes;
  std::vector<Point> points;

  std::size_t size() const { return boxes.size(); }

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

}  // namespace rank_reward
