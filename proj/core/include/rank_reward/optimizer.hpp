#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rank_reward::grpo {

struct AdamConfig {
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Decoupled weight decay (AdamW); 0 disables it.
  double weight_decay = 0.0;
};

/// AdamW taking ascent steps on an objective.
class AdamAscent {
 public:
  AdamAscent(std::size_t parameter_count, AdamConfig cfg);

  /// params += lr * mhat / (sqrt(vhat) + eps) - lr * wd * params
  void step(std::span<double> params, std::span<const double> gradient);

  std::uint64_t steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

}  // namespace rank_reward::grpo
