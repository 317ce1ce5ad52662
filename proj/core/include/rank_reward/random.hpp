#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace rank_reward {

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for a named sub-stream of `root`. Streams with different names or
/// indices are statistically independent and do not depend on call order.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream,
                          std::uint64_t a = 0, std::uint64_t b = 0);

/// mt19937_64 with platform-independent variate generation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller.
  double normal();

  /// Index drawn from a probability vector by inverse-CDF lookup.
  std::size_t categorical(std::span<const double> probs);

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rank_reward
