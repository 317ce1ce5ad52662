#include "rank_reward/grpo_engine.hpp"

#include <algorithm>
#include <cmath>

#include "rank_reward/errors.hpp"

namespace rank_reward::grpo {

void GrpoConfig::validate() const {
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw ConfigError("clip_epsilon must lie in (0, 1)");
  }
  if (!(kl_beta >= 0.0)) throw ConfigError("kl_beta must be >= 0");
  if (!(adv_std_floor > 0.0)) throw ConfigError("adv_std_floor must be > 0");
  if (group_size < 2) throw ConfigError("group_size must be >= 2");
}

double total_reward(const grammar::FormatScore& fmt, double acc) {
  if (!(acc >= 0.0 && acc <= 1.0)) {
    throw ValueRangeError("accuracy reward outside [0, 1]");
  }
  return fmt.total + acc;
}

AdvantageVector group_advantages(std::span<const double> rewards,
                                 const GrpoConfig& cfg) {
  if (rewards.size() < 2) {
    throw GroupTooSmallError("advantage normalization needs a group of >= 2");
  }
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double stddev = std::sqrt(var / n);

  AdvantageVector adv(rewards.size(), 0.0);
  if (!(stddev >= cfg.adv_std_floor)) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    adv[i] = (rewards[i] - mean) / stddev;
  }
  return adv;
}

double kl_penalty(std::span<const double> logp_new,
                  std::span<const double> logp_ref) {
  if (logp_new.size() != logp_ref.size()) {
    throw LengthMismatchError("kl_penalty: token lists differ in length");
  }
  if (logp_new.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < logp_new.size(); ++t) {
    const double d = logp_ref[t] - logp_new[t];
    sum += std::max(0.0, std::expm1(d) - d);
  }
  return sum / static_cast<double>(logp_new.size());
}

SurrogateTerms surrogate_terms(const RolloutGroup& group,
                               std::span<const double> advantages,
                               const GrpoConfig& cfg) {
  const auto& cands = group.candidates;
  if (advantages.size() != cands.size()) {
    throw LengthMismatchError("surrogate: one advantage per candidate required");
  }
  SurrogateTerms terms;
  terms.token_weights.resize(cands.size());
  if (cands.empty()) return terms;

  const double inv_g = 1.0 / static_cast<double>(cands.size());
  const double lo = 1.0 - cfg.clip_epsilon;
  const double hi = 1.0 + cfg.clip_epsilon;
  std::size_t clipped = 0;

  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto& c = cands[i];
    const std::size_t len = c.logp_new.size();
    if (c.logp_old.size() != len || c.logp_ref.size() != len) {
      throw LengthMismatchError("surrogate: candidate log-prob lists differ in length");
    }
    double log_ratio = 0.0;
    for (std::size_t t = 0; t < len; ++t) log_ratio += c.logp_new[t] - c.logp_old[t];
    const double s1 = std::exp(log_ratio);
    const double s2 = std::clamp(s1, lo, hi);
    const double a = advantages[i];
    const double unclipped = s1 * a;
    const double clipped_value = s2 * a;

    // d min(s1 A, s2 A) / d logp_new[t] is s1 A on the unclipped branch and
    // 0 once the clipped constant is the minimum.
    double seq_weight = 0.0;
    if (unclipped <= clipped_value) {
      terms.surrogate += unclipped * inv_g;
      seq_weight = unclipped * inv_g;
    } else {
      terms.surrogate += clipped_value * inv_g;
      ++clipped;
    }

    const double kl_i = kl_penalty(c.logp_new, c.logp_ref);
    terms.kl += kl_i * inv_g;

    auto& w = terms.token_weights[i];
    w.assign(len, seq_weight);
    if (len > 0 && cfg.kl_beta != 0.0) {
      const double kl_scale = cfg.kl_beta * inv_g / static_cast<double>(len);
      for (std::size_t t = 0; t < len; ++t) {
        // d/d ln of exp(lr - ln) - (lr - ln) - 1 is 1 - exp(lr - ln).
        const double dk = -std::expm1(c.logp_ref[t] - c.logp_new[t]);
        w[t] -= kl_scale * dk;
      }
    }
  }
  terms.objective = terms.surrogate - cfg.kl_beta * terms.kl;
  terms.clip_fraction = static_cast<double>(clipped) * inv_g;
  return terms;
}

double surrogate_loss(const RolloutGroup& group,
                      std::span<const double> advantages, const GrpoConfig& cfg) {
  return surrogate_terms(group, advantages, cfg).objective;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double token_entropy(std::span<const std::vector<double>> steps) {
  if (steps.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : steps) {
    double mass = 0.0;
    for (double v : p) {
      if (!(v >= 0.0)) throw DistributionError("negative probability");
      mass += v;
    }
    if (std::abs(mass - 1.0) > 1e-6) {
      throw DistributionError("step distribution does not sum to 1");
    }
    sum += entropy(p);
  }
  return sum / static_cast<double>(steps.size());
}

}  // namespace rank_reward::grpo
