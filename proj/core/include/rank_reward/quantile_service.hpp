#pragma once

#include <cstdint>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <vector>

namespace rank_reward::quantile {

/// Per-dimension empirical quantiles q_j in [0, 1].
struct QuantileVector {
  std::vector<double> values;

  friend bool operator==(const QuantileVector&, const QuantileVector&) = default;
};

struct QueueSummary {
  double p10 = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double mean = 0.0;
};

/// Rolling metric history: one fixed-capacity FIFO queue per dimension,
/// zero-filled at construction, plus a step buffer of pending vectors.
///
/// Reader/writer contract:
///  - quantile(), map_vector(), contents() and summary() take a shared lock
///    and may run concurrently with each other and with push_step().
///  - push_step() only touches the step buffer; concurrent scorers may call
///    it in parallel. Buffered vectors are invisible to queries.
///  - flush_step() takes the queues exclusively and is the only operation
///    that changes query results. The trainer calls it once per step.
class MetricHistory {
 public:
  /// Throws ConfigError when dimensions or capacity is zero.
  MetricHistory(std::size_t dimensions, std::size_t capacity);

  MetricHistory(const MetricHistory&) = delete;
  MetricHistory& operator=(const MetricHistory&) = delete;

  std::size_t dimensions() const { return dimensions_; }
  std::size_t capacity() const { return capacity_; }

  /// (1/M) * |{m : s_m <= x}| for dimension `dim` (0-based).
  /// Throws DimensionError for dim >= dimensions().
  double quantile(std::size_t dim, double x) const;

  /// Componentwise quantile; x must have dimensions() entries.
  QuantileVector map_vector(std::span<const double> x) const;

  /// Buffers a batch of vectors for the next flush. All entries must lie in
  /// [0, 1]; on ValueRangeError nothing from the batch is buffered.
  void push_step(std::span<const std::vector<double>> batch);
  void push(std::span<const double> x);

  /// Moves buffered vectors into the queues in push order, evicting the
  /// oldest stored values, then clears the buffer.
  void flush_step();

  std::size_t pending() const;
  std::uint64_t flushed_steps() const;

  /// Queue contents of one dimension, oldest first.
  std::vector<double> contents(std::size_t dim) const;

  /// p10/p50/p90 as lower empirical quantiles (smallest stored value whose
  /// ECDF reaches p) and the arithmetic mean.
  QueueSummary summary(std::size_t dim) const;

 private:
  void check_dim(std::size_t dim) const;
  static void check_vector(std::span<const double> x, std::size_t dims);

  std::size_t dimensions_;
  std::size_t capacity_;

  mutable std::shared_mutex queues_mutex_;
  std::vector<std::vector<double>> rings_;  // guarded by queues_mutex_
  std::size_t head_ = 0;                    // index of the oldest entry
  std::uint64_t flushed_steps_ = 0;

  mutable std::mutex buffer_mutex_;
  std::vector<std::vector<double>> step_buffer_;  // guarded by buffer_mutex_
};

/// Arithmetic mean of the quantile scores.
double aggregate_reward(const QuantileVector& q);

}  // namespace rank_reward::quantile
