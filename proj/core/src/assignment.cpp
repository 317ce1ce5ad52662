#include "rank_reward/assignment.hpp"

#include <limits>

#include "rank_reward/errors.hpp"

namespace rank_reward {
namespace {

// Minimum-cost assignment with row/column potentials on a 1-indexed square
// cost matrix given as a callable.
template <class Cost>
std::vector<std::size_t> hungarian_min(std::size_t n, Cost cost) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

// Optimal total over the sub-problem formed by the given rows and columns.
double sub_optimum(const WeightMatrix& w, const std::vector<std::size_t>& rows,
                   const std::vector<std::size_t>& cols) {
  const std::size_t n = rows.size();
  if (n == 0) return 0.0;
  const auto assignment = hungarian_min(
      n, [&](std::size_t r, std::size_t c) { return -w(rows[r], cols[c]); });
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) total += w(rows[r], cols[assignment[r]]);
  return total;
}

void require_square(const WeightMatrix& w) {
  if (w.rows() != w.cols()) {
    throw LengthMismatchError("assignment requires a square weight matrix");
  }
}

}  // namespace

AssignmentResult max_weight_assignment(const WeightMatrix& weights) {
  require_square(weights);
  AssignmentResult result;
  result.row_to_col = hungarian_min(weights.rows(), [&](std::size_t r, std::size_t c) {
    return -weights(r, c);
  });
  for (std::size_t r = 0; r < weights.rows(); ++r) {
    result.total += weights(r, result.row_to_col[r]);
  }
  return result;
}

AssignmentResult canonical_max_weight_assignment(const WeightMatrix& weights,
                                                 double tolerance) {
  require_square(weights);
  const std::size_t n = weights.rows();
  const double optimum = max_weight_assignment(weights).total;

  AssignmentResult result;
  result.row_to_col.resize(n);
  std::vector<char> col_used(n, 0);
  double prefix = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<std::size_t> rest_rows;
    for (std::size_t rr = r + 1; rr < n; ++rr) rest_rows.push_back(rr);

    std::size_t chosen = n;
    std::size_t best_col = n;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n && chosen == n; ++c) {
      if (col_used[c]) continue;
      std::vector<std::size_t> rest_cols;
      for (std::size_t cc = 0; cc < n; ++cc) {
        if (!col_used[cc] && cc != c) rest_cols.push_back(cc);
      }
      const double value =
          prefix + weights(r, c) + sub_optimum(weights, rest_rows, rest_cols);
      if (value >= optimum - tolerance) chosen = c;
      if (value > best_value) {
        best_value = value;
        best_col = c;
      }
    }
    // Rounding can leave no column inside the tolerance band; fall back to
    // the best completion found.
    if (chosen == n) chosen = best_col;
    result.row_to_col[r] = chosen;
    col_used[chosen] = 1;
    prefix += weights(r, chosen);
  }
  result.total = prefix;
  return result;
}

}  // namespace rank_reward
