#pragma once

#include <cstddef>
#include <vector>

namespace rank_reward {

/// Dense row-major weight matrix for assignment problems.
class WeightMatrix {
 public:
  WeightMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

struct AssignmentResult {
  double total = 0.0;
  /// row_to_col[r] is the column assigned to row r of the square problem.
  std::vector<std::size_t> row_to_col;
};

/// Maximum-weight perfect matching of a square matrix (Hungarian method,
/// O(n^3)).
AssignmentResult max_weight_assignment(const WeightMatrix& weights);

/// As max_weight_assignment, but among all assignments whose total is within
/// `tolerance` of the optimum returns the one whose row_to_col sequence is
/// lexicographically smallest. Deterministic under ties.
AssignmentResult canonical_max_weight_assignment(const WeightMatrix& weights,
                                                 double tolerance = 1e-9);

}  // namespace rank_reward
