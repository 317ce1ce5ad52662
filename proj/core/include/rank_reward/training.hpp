#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rank_reward/grpo_engine.hpp"
#include "rank_reward/optimizer.hpp"
#include "rank_reward/perception_metrics.hpp"
#include "rank_reward/quantile_service.hpp"
#include "rank_reward/response_grammar.hpp"
#include "rank_reward/scene_io.hpp"
#include "rank_reward/toy_env.hpp"
#include "rank_reward/toy_policy.hpp"

namespace rank_reward::env {

/// How the raw accuracy vector becomes the accuracy reward.
///  - Binary: each component thresholded (x1 >= 0.5, exact count, every point
///    within tau_min with matching counts) and averaged.
///  - RawSum: mean of the raw components.
///  - DistributionRanked: mean of the components' empirical quantiles in the
///    rolling metric history.
enum class RewardMode { Binary, RawSum, DistributionRanked };

std::string_view to_string(RewardMode m);
std::optional<RewardMode> parse_reward_mode(std::string_view s);
inline constexpr std::string_view kRewardModeNames = "binary, raw_sum, distribution_ranked";

double binary_accuracy_reward(const metrics::AccuracyVector& x);
double raw_sum_accuracy_reward(const metrics::AccuracyVector& x);

struct TrainRunConfig {
  std::size_t steps = 300;
  std::size_t batch_size = 16;
  std::size_t group_size = 8;
  /// Adam step size for the toy policy's logit weights.
  double learning_rate = 0.03;
  RewardMode reward_mode = RewardMode::DistributionRanked;
  bool look_format_enabled = true;
  std::uint64_t seed = 0;
  TaskMix task = TaskMix::Multi;
  std::size_t threads = 1;

  grpo::GrpoConfig grpo;
  grpo::AdamConfig adam;  // learning_rate above overrides adam.learning_rate
  metrics::DistanceThresholds thresholds;
  grammar::FormatConfig format;
  std::size_t queue_capacity = 2048;
  /// Push accuracy vectors of candidates whose answer failed validation.
  bool push_invalid = true;
  PolicyShape shape;
  SceneConfig scene;
  EvidenceConfig evidence;
  double init_scale = 0.0;

  /// Throws ConfigError listing the offending field.
  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  double mean_reward = 0.0;
  double mean_fmt = 0.0;
  double mean_acc = 0.0;
  double mean_entropy = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
  double objective = 0.0;
  std::array<double, 3> per_component_mean{};
  std::array<double, 3> per_component_quantile_mean{};
};

std::string step_record_to_json(const StepRecord& r);

struct EpisodeLog {
  std::vector<StepRecord> steps;
  ToyPolicy policy;
};

/// Called after each step's flush with the record and the updated history.
using StepObserver =
    std::function<void(const StepRecord&, const quantile::MetricHistory&)>;

/// Full loop per step: snapshot theta_old, generate batch_size scenes, sample
/// a group per scene, score format and accuracy, compose rewards, normalize
/// advantages per group, take one Adam ascent step on the clipped surrogate,
/// then flush the metric history. Deterministic in cfg.seed for any thread
/// count. Throws NumericalError when the objective or gradient is non-finite.
EpisodeLog run_training(const TrainRunConfig& cfg, const StepObserver& observer = {});

/// Deterministic evaluation scenes (scene i from derive_seed(seed, "eval", i)).
std::vector<io::SceneRecord> make_eval_scenes(std::uint64_t seed, std::size_t count,
                                              TaskMix task, const SceneConfig& cfg = {});

struct PolicyEvaluation {
  metrics::EvalReport report;
  std::vector<io::PredictionRecord> predictions;
};

/// Greedy decoding on each scene, scored through the text path
/// (render -> parse -> validate -> metrics).
PolicyEvaluation evaluate_policy(const ToyPolicy& policy,
                                 std::span<const io::SceneRecord> scenes,
                                 std::uint64_t evidence_seed,
                                 const EvidenceConfig& evidence,
                                 const metrics::DistanceThresholds& thr,
                                 std::size_t threads = 1);

}  // namespace rank_reward::env
