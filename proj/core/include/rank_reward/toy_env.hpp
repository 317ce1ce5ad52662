#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rank_reward/grpo_engine.hpp"
#include "rank_reward/scene_io.hpp"
#include "rank_reward/toy_policy.hpp"

namespace rank_reward::env {

enum class Difficulty { Single, Multi };

/// Which difficulties a training or evaluation set draws from.
enum class TaskMix { Single, Multi, Mixed };

std::string_view to_string(Difficulty d);
std::string_view to_string(TaskMix m);
std::optional<TaskMix> parse_task_mix(std::string_view s);

struct SceneConfig {
  double width = 1000.0;
  double height = 1000.0;
  double min_side = 40.0;
  double max_side = 400.0;
  std::size_t max_objects = 6;

  void validate() const;
};

/// Synthetic scene; every GT box lies inside the frame and every GT point
/// inside its box.
struct SyntheticScene {
  std::string scene_id;
  double width = 0.0;
  double height = 0.0;
  GroundTruth gt;
  Difficulty difficulty = Difficulty::Single;

  io::SceneRecord record() const { return {scene_id, width, height, gt}; }
};

/// Deterministic in `seed`. Single scenes hold one object, multi scenes
/// 2..max_objects objects, each with area >= 100 px^2.
SyntheticScene generate_scene(std::uint64_t seed, Difficulty difficulty,
                              const SceneConfig& cfg = {});

/// Noisy detector that produces the policy's evidence: objects may be missed,
/// a ghost may appear, and positions and sizes are jittered before being
/// quantized onto a coarse grid.
struct EvidenceConfig {
  double miss_prob = 0.1;
  double ghost_prob = 0.15;
  double jitter = 25.0;

  void validate() const;
};

/// Per-slot features: evidence sorted by jittered center x, truncated to
/// max_slots; slots without evidence only carry bias and slot index.
Observation observe(const io::SceneRecord& scene, std::uint64_t seed,
                    const EvidenceConfig& cfg, const PolicyShape& shape);

/// A rollout group together with the token sequences behind each candidate.
struct SampledGroup {
  grpo::RolloutGroup group;
  std::vector<TokenSequence> tokens;
};

/// G independent samples under theta_old, sample i seeded by
/// derive_seed(seed, "sample", i). Candidates carry rendered text and
/// per-token log-probs under theta, theta_old and theta_ref.
SampledGroup sample_group(const ToyPolicy& policy, const Observation& obs,
                          std::size_t group_size, std::uint64_t seed,
                          std::string query_id = {});

}  // namespace rank_reward::env
