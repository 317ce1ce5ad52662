#include "rank_reward/toy_env.hpp"

#include <algorithm>
#include <cmath>

#include "rank_reward/errors.hpp"
#include "rank_reward/random.hpp"

namespace rank_reward::env {

std::string_view to_string(Difficulty d) {
  return d == Difficulty::Single ? "single" : "multi";
}

std::string_view to_string(TaskMix m) {
  switch (m) {
    case TaskMix::Single: return "single";
    case TaskMix::Multi: return "multi";
    case TaskMix::Mixed: return "mixed";
  }
  return "unknown";
}

std::optional<TaskMix> parse_task_mix(std::string_view s) {
  if (s == "single") return TaskMix::Single;
  if (s == "multi") return TaskMix::Multi;
  if (s == "mixed") return TaskMix::Mixed;
  return std::nullopt;
}

void SceneConfig::validate() const {
  if (!(width > 0.0 && height > 0.0)) throw ConfigError("scene frame must be positive");
  if (!(min_side >= 10.0 && min_side <= max_side)) {
    throw ConfigError("scene sides require 10 <= min_side <= max_side");
  }
  if (max_side > std::min(width, height)) throw ConfigError("max_side exceeds frame");
  if (max_objects < 2) throw ConfigError("max_objects must be >= 2");
}

void EvidenceConfig::validate() const {
  if (!(miss_prob >= 0.0 && miss_prob < 1.0)) throw ConfigError("miss_prob must be in [0, 1)");
  if (!(ghost_prob >= 0.0 && ghost_prob <= 1.0)) throw ConfigError("ghost_prob must be in [0, 1]");
  if (!(jitter >= 0.0)) throw ConfigError("jitter must be >= 0");
}

SyntheticScene generate_scene(std::uint64_t seed, Difficulty difficulty,
                              const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(seed);
  SyntheticScene scene;
  scene.scene_id = "scene-" + std::to_string(seed);
  scene.width = cfg.width;
  scene.height = cfg.height;
  scene.difficulty = difficulty;

  const std::size_t count =
      difficulty == Difficulty::Single
          ? 1
          : static_cast<std::size_t>(
                rng.uniform_int(2, static_cast<std::int64_t>(cfg.max_objects)));
  for (std::size_t k = 0; k < count; ++k) {
    const double w = std::round(rng.uniform(cfg.min_side, cfg.max_side));
    const double h = std::round(rng.uniform(cfg.min_side, cfg.max_side));
    const double x1 = std::round(rng.uniform(0.0, cfg.width - w));
    const double y1 = std::round(rng.uniform(0.0, cfg.height - h));
    const BBox box{x1, y1, x1 + w, y1 + h};
    const Point point{std::round(x1 + w / 2.0 + rng.uniform(-w / 4.0, w / 4.0)),
                      std::round(y1 + h / 2.0 + rng.uniform(-h / 4.0, h / 4.0))};
    scene.gt.boxes.push_back(box);
    scene.gt.points.push_back(point);
  }
  return scene;
}

namespace {

struct Evidence {
  double cx;
  double cy;
  double w;
  double h;
};

std::size_t coarse_index(double value, double extent, std::size_t cells) {
  const double t = std::clamp(value / extent, 0.0, 1.0);
  return std::min(cells - 1, static_cast<std::size_t>(t * static_cast<double>(cells)));
}

}  // namespace

Observation observe(const io::SceneRecord& scene, std::uint64_t seed,
                    const EvidenceConfig& cfg, const PolicyShape& shape) {
  cfg.validate();
  Rng rng(seed);
  std::vector<Evidence> evidence;
  for (const auto& b : scene.gt.boxes) {
    if (rng.bernoulli(cfg.miss_prob)) continue;
    evidence.push_back({(b.x1 + b.x2) / 2.0 + cfg.jitter * rng.normal(),
                        (b.y1 + b.y2) / 2.0 + cfg.jitter * rng.normal(),
                        b.width() * (1.0 + 0.1 * rng.normal()),
                        b.height() * (1.0 + 0.1 * rng.normal())});
  }
  if (rng.bernoulli(cfg.ghost_prob)) {
    evidence.push_back({rng.uniform(0.0, scene.width), rng.uniform(0.0, scene.height),
                        rng.uniform(0.05, 0.4) * scene.width,
                        rng.uniform(0.05, 0.4) * scene.height});
  }
  std::stable_sort(evidence.begin(), evidence.end(),
                   [](const Evidence& a, const Evidence& b) { return a.cx < b.cx; });

  const std::size_t C = shape.coarse_cells;
  const std::size_t S = shape.size_classes;
  const std::size_t slot_base = 2 + 2 * C + 2 * S;
  Observation obs;
  obs.slot_features.resize(shape.max_slots);
  for (std::size_t k = 0; k < shape.max_slots; ++k) {
    auto& f = obs.slot_features[k];
    f.push_back(0);  // bias
    if (k < evidence.size()) {
      const auto& e = evidence[k];
      f.push_back(1);  // presence
      f.push_back(static_cast<std::uint16_t>(2 + coarse_index(e.cx, scene.width, C)));
      f.push_back(static_cast<std::uint16_t>(2 + C + coarse_index(e.cy, scene.height, C)));
      // Size classes cover [0, width/2) evenly; larger sides share the top class.
      f.push_back(static_cast<std::uint16_t>(
          2 + 2 * C + coarse_index(e.w, scene.width / 2.0, S)));
      f.push_back(static_cast<std::uint16_t>(
          2 + 2 * C + S + coarse_index(e.h, scene.height / 2.0, S)));
    }
    f.push_back(static_cast<std::uint16_t>(slot_base + k));
  }
  return obs;
}

SampledGroup sample_group(const ToyPolicy& policy, const Observation& obs,
                          std::size_t group_size, std::uint64_t seed,
                          std::string query_id) {
  if (group_size < 2) throw GroupTooSmallError("sample_group needs G >= 2");
  SampledGroup out;
  out.group.query_id = std::move(query_id);
  out.group.candidates.resize(group_size);
  out.tokens.resize(group_size);
  for (std::size_t i = 0; i < group_size; ++i) {
    Rng rng(derive_seed(seed, "sample", i));
    auto tokens = policy.sample(policy.old(), obs, rng);
    auto& c = out.group.candidates[i];
    c.response = render_tokens(tokens, policy.shape());
    c.logp_new = policy.token_logprobs(policy.current(), obs, tokens);
    c.logp_old = policy.token_logprobs(policy.old(), obs, tokens);
    c.logp_ref = policy.token_logprobs(policy.reference(), obs, tokens);
    out.tokens[i] = std::move(tokens);
  }
  return out;
}

}  // namespace rank_reward::env
