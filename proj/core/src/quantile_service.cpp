#include "rank_reward/quantile_service.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rank_reward/errors.hpp"

namespace rank_reward::quantile {

MetricHistory::MetricHistory(std::size_t dimensions, std::size_t capacity)
    : dimensions_(dimensions), capacity_(capacity) {
  if (dimensions == 0) throw ConfigError("metric history needs >= 1 dimension");
  if (capacity == 0) throw ConfigError("metric history needs capacity >= 1");
  rings_.assign(dimensions, std::vector<double>(capacity, 0.0));
}

void MetricHistory::check_dim(std::size_t dim) const {
  if (dim >= dimensions_) {
    throw DimensionError("dimension " + std::to_string(dim) +
                         " out of range for history with " +
                         std::to_string(dimensions_) + " dimensions");
  }
}

void MetricHistory::check_vector(std::span<const double> x, std::size_t dims) {
  if (x.size() != dims) {
    throw DimensionError("vector has " + std::to_string(x.size()) +
                         " components, history has " + std::to_string(dims));
  }
  for (double v : x) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValueRangeError("metric value outside [0, 1]: " + std::to_string(v));
    }
  }
}

double MetricHistory::quantile(std::size_t dim, double x) const {
  check_dim(dim);
  std::shared_lock lock(queues_mutex_);
  const auto& ring = rings_[dim];
  const auto count = std::count_if(ring.begin(), ring.end(),
                                   [x](double s) { return s <= x; });
  return static_cast<double>(count) / static_cast<double>(capacity_);
}

QuantileVector MetricHistory::map_vector(std::span<const double> x) const {
  if (x.size() != dimensions_) {
    throw DimensionError("map_vector: expected " + std::to_string(dimensions_) +
                         " components");
  }
  QuantileVector q;
  q.values.reserve(dimensions_);
  for (std::size_t j = 0; j < dimensions_; ++j) q.values.push_back(quantile(j, x[j]));
  return q;
}

void MetricHistory::push_step(std::span<const std::vector<double>> batch) {
  for (const auto& x : batch) check_vector(x, dimensions_);
  std::lock_guard lock(buffer_mutex_);
  step_buffer_.insert(step_buffer_.end(), batch.begin(), batch.end());
}

void MetricHistory::push(std::span<const double> x) {
  check_vector(x, dimensions_);
  std::lock_guard lock(buffer_mutex_);
  step_buffer_.emplace_back(x.begin(), x.end());
}

void MetricHistory::flush_step() {
  std::unique_lock queues(queues_mutex_);
  std::lock_guard buffer(buffer_mutex_);
  for (const auto& x : step_buffer_) {
    for (std::size_t j = 0; j < dimensions_; ++j) rings_[j][head_] = x[j];
    head_ = (head_ + 1) % capacity_;
  }
  step_buffer_.clear();
  ++flushed_steps_;
}

std::size_t MetricHistory::pending() const {
  std::lock_guard lock(buffer_mutex_);
  return step_buffer_.size();
}

std::uint64_t MetricHistory::flushed_steps() const {
  std::shared_lock lock(queues_mutex_);
  return flushed_steps_;
}

std::vector<double> MetricHistory::contents(std::size_t dim) const {
  check_dim(dim);
  std::shared_lock lock(queues_mutex_);
  const auto& ring = rings_[dim];
  std::vector<double> out;
  out.reserve(capacity_);
  out.insert(out.end(), ring.begin() + static_cast<std::ptrdiff_t>(head_), ring.end());
  out.insert(out.end(), ring.begin(), ring.begin() + static_cast<std::ptrdiff_t>(head_));
  return out;
}

QueueSummary MetricHistory::summary(std::size_t dim) const {
  std::vector<double> sorted = contents(dim);
  std::sort(sorted.begin(), sorted.end());
  const auto lower_quantile = [&](double p) {
    const auto rank = static_cast<std::size_t>(
        std::ceil(p * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
  };
  QueueSummary s;
  s.p10 = lower_quantile(0.1);
  s.p50 = lower_quantile(0.5);
  s.p90 = lower_quantile(0.9);
  double sum = 0.0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(sorted.size());
  return s;
}

double aggregate_reward(const QuantileVector& q) {
  if (q.values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : q.values) sum += v;
  return sum / static_cast<double>(q.values.size());
}

}  // namespace rank_reward::quantile
