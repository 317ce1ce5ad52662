#pragma once

#include <span>
#include <string>
#include <vector>

#include "rank_reward/response_grammar.hpp"

namespace rank_reward::grpo {

struct GrpoConfig {
  double clip_epsilon = 0.2;
  double kl_beta = 1e-2;
  /// Groups whose reward std falls below this get all-zero advantages.
  double adv_std_floor = 1e-6;
  std::size_t group_size = 8;

  /// Throws ConfigError unless 0 < epsilon < 1, beta >= 0, floor > 0, G >= 2.
  void validate() const;
};

/// One sampled output with its per-token log-probabilities under the
/// current, old (sampling) and reference policies.
struct Candidate {
  std::string response;
  std::vector<double> logp_new;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
  double reward = 0.0;
};

struct RolloutGroup {
  std::string query_id;
  std::vector<Candidate> candidates;
};

using AdvantageVector = std::vector<double>;

/// Format total plus accuracy reward. Throws ValueRangeError unless
/// acc is in [0, 1].
double total_reward(const grammar::FormatScore& fmt, double acc);

/// (r_i - mean) / std with the population standard deviation. Degenerate
/// groups (std < adv_std_floor) yield all zeros.
AdvantageVector group_advantages(std::span<const double> rewards,
                                 const GrpoConfig& cfg);

/// Mean over tokens of exp(lr - ln) - (lr - ln) - 1, which is >= 0.
double kl_penalty(std::span<const double> logp_new,
                  std::span<const double> logp_ref);

/// Objective value and its derivative with respect to every logp_new entry.
struct SurrogateTerms {
  double objective = 0.0;
  double surrogate = 0.0;  // (1/G) sum_i min(s1 A, s2 A)
  double kl = 0.0;         // (1/G) sum_i kl_penalty(new_i, ref_i)
  /// Fraction of candidates whose clipped branch is active.
  double clip_fraction = 0.0;
  /// d objective / d logp_new[i][t].
  std::vector<std::vector<double>> token_weights;
};

/// Clipped surrogate with a sequence-level ratio
/// s1 = exp(sum logp_new - sum logp_old), s2 = clip(s1, 1-eps, 1+eps):
///   J = (1/G) sum_i min(s1 A_i, s2 A_i) - beta * (1/G) sum_i KL_i.
/// Returned for maximization. Throws LengthMismatchError when the advantage
/// count or per-candidate log-probability lengths disagree.
SurrogateTerms surrogate_terms(const RolloutGroup& group,
                               std::span<const double> advantages,
                               const GrpoConfig& cfg);

double surrogate_loss(const RolloutGroup& group,
                      std::span<const double> advantages, const GrpoConfig& cfg);

/// Shannon entropy in nats of one distribution.
double entropy(std::span<const double> probs);

/// Mean per-step entropy. Throws DistributionError when a step does not sum
/// to 1 within 1e-6. Empty input yields 0.
double token_entropy(std::span<const std::vector<double>> steps);

}  // namespace rank_reward::grpo
