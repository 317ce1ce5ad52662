#include "rank_reward/training.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "rank_reward/errors.hpp"
#include "rank_reward/parallel.hpp"
#include "rank_reward/random.hpp"

namespace rank_reward::env {

std::string_view to_string(RewardMode m) {
  switch (m) {
    case RewardMode::Binary: return "binary";
    case RewardMode::RawSum: return "raw_sum";
    case RewardMode::DistributionRanked: return "distribution_ranked";
  }
  return "unknown";
}

std::optional<RewardMode> parse_reward_mode(std::string_view s) {
  if (s == "binary") return RewardMode::Binary;
  if (s == "raw_sum") return RewardMode::RawSum;
  if (s == "distribution_ranked") return RewardMode::DistributionRanked;
  return std::nullopt;
}

double binary_accuracy_reward(const metrics::AccuracyVector& x) {
  const double b1 = x.x1 >= 0.5 ? 1.0 : 0.0;
  const double b2 = x.x2 >= 1.0 ? 1.0 : 0.0;
  const double b3 = x.x3 >= 1.0 - 1e-9 ? 1.0 : 0.0;
  return (b1 + b2 + b3) / 3.0;
}

double raw_sum_accuracy_reward(const metrics::AccuracyVector& x) {
  return (x.x1 + x.x2 + x.x3) / 3.0;
}

void TrainRunConfig::validate() const {
  if (steps < 1) throw ConfigError("train.steps must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (group_size < 2) throw ConfigError("train.group_size must be >= 2");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train.learning_rate must be a finite value >= 0");
  }
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (queue_capacity < 1) throw ConfigError("quantile.capacity must be >= 1");
  if (!(init_scale >= 0.0)) throw ConfigError("train.init_scale must be >= 0");
  grpo::GrpoConfig g = grpo;
  g.group_size = group_size;
  g.validate();
  thresholds.validate();
  shape.validate();
  scene.validate();
  evidence.validate();
  if (scene.max_objects > shape.max_slots) {
    throw ConfigError("env.max_objects must not exceed env.max_slots");
  }
  if (!(format.repetition_threshold > 0.0 && format.repetition_threshold <= 1.0)) {
    throw ConfigError("format.repetition_threshold must be in (0, 1]");
  }
  if (format.ngram < 1) throw ConfigError("format.ngram must be >= 1");
}

std::string step_record_to_json(const StepRecord& r) {
  nlohmann::ordered_json doc;
  doc["step"] = r.step;
  doc["mean_reward"] = r.mean_reward;
  doc["mean_fmt"] = r.mean_fmt;
  doc["mean_acc"] = r.mean_acc;
  doc["mean_entropy"] = r.mean_entropy;
  doc["kl"] = r.kl;
  doc["clip_fraction"] = r.clip_fraction;
  doc["objective"] = r.objective;
  doc["per_component_mean"] = r.per_component_mean;
  doc["per_component_quantile_mean"] = r.per_component_quantile_mean;
  return doc.dump();
}

namespace {

struct ScoredCandidate {
  TokenSequence tokens;
  grpo::Candidate candidate;
  grammar::FormatScore fmt;
  metrics::AccuracyVector accuracy;
  quantile::QuantileVector quantiles;
  double acc_reward = 0.0;
  bool answer_valid = false;
  double entropy_sum = 0.0;
};

Difficulty pick_difficulty(TaskMix task, std::uint64_t seed, std::size_t a,
                           std::size_t b) {
  switch (task) {
    case TaskMix::Single: return Difficulty::Single;
    case TaskMix::Multi: return Difficulty::Multi;
    case TaskMix::Mixed:
      return (derive_seed(seed, "task", a, b) & 1U) ? Difficulty::Multi
                                                     : Difficulty::Single;
  }
  return Difficulty::Multi;
}

AnswerPayload payload_of(const grammar::ParsedResponse& parsed, bool& valid) {
  valid = false;
  if (!parsed.answer_text) return {};
  auto v = grammar::validate_answer(*parsed.answer_text);
  if (auto* p = std::get_if<AnswerPayload>(&v)) {
    valid = true;
    return std::move(*p);
  }
  return {};
}

double accuracy_reward(RewardMode mode, const metrics::AccuracyVector& x,
                       const quantile::QuantileVector& q) {
  switch (mode) {
    case RewardMode::Binary: return binary_accuracy_reward(x);
    case RewardMode::RawSum: return raw_sum_accuracy_reward(x);
    case RewardMode::DistributionRanked: return quantile::aggregate_reward(q);
  }
  return 0.0;
}

}  // namespace

EpisodeLog run_training(const TrainRunConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  PolicyShape shape = cfg.shape;
  shape.look_enabled = cfg.look_format_enabled;
  grammar::FormatConfig format = cfg.format;
  format.score_look = cfg.look_format_enabled;
  grpo::GrpoConfig grpo_cfg = cfg.grpo;
  grpo_cfg.group_size = cfg.group_size;
  grpo::AdamConfig adam_cfg = cfg.adam;
  adam_cfg.learning_rate = cfg.learning_rate;

  EpisodeLog log{{}, ToyPolicy(shape, derive_seed(cfg.seed, "init"), cfg.init_scale)};
  ToyPolicy& policy = log.policy;
  grpo::AdamAscent optimizer(policy.parameter_count(), adam_cfg);
  quantile::MetricHistory history(3, cfg.queue_capacity);

  const std::size_t B = cfg.batch_size;
  const std::size_t G = cfg.group_size;
  std::vector<SyntheticScene> scenes(B);
  std::vector<Observation> observations(B);
  std::vector<ScoredCandidate> scored(B * G);
  std::vector<grpo::SurrogateTerms> terms(B);
  std::vector<std::vector<double>> group_grads(B);

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    policy.snapshot_old();

    parallel_for(B, cfg.threads, [&](std::size_t b) {
      scenes[b] = generate_scene(derive_seed(cfg.seed, "scene", step, b),
                                 pick_difficulty(cfg.task, cfg.seed, step, b), cfg.scene);
      observations[b] = observe(scenes[b].record(),
                                derive_seed(cfg.seed, "evidence", step, b),
                                cfg.evidence, shape);
    });

    parallel_for(B * G, cfg.threads, [&](std::size_t n) {
      const std::size_t b = n / G;
      const Observation& obs = observations[b];
      ScoredCandidate& s = scored[n];
      Rng rng(derive_seed(cfg.seed, "sampling", step, n));
      s.tokens = policy.sample(policy.old(), obs, rng);
      s.candidate.response = render_tokens(s.tokens, shape);

      const auto parsed = grammar::parse_response(s.candidate.response);
      s.fmt = grammar::score_format(parsed, format);
      const AnswerPayload payload = payload_of(parsed, s.answer_valid);
      s.accuracy = metrics::accuracy_vector(payload, scenes[b].gt, cfg.thresholds);
      const auto x = s.accuracy.as_array();
      s.quantiles = history.map_vector(x);
      s.acc_reward = accuracy_reward(cfg.reward_mode, s.accuracy, s.quantiles);
      s.candidate.reward = grpo::total_reward(s.fmt, s.acc_reward);

      s.candidate.logp_new = policy.token_logprobs(policy.current(), obs, s.tokens);
      s.candidate.logp_old = policy.token_logprobs(policy.old(), obs, s.tokens);
      s.candidate.logp_ref = policy.token_logprobs(policy.reference(), obs, s.tokens);
      s.entropy_sum = 0.0;
      for (const auto& p : policy.token_distributions(policy.old(), obs, s.tokens)) {
        s.entropy_sum += grpo::entropy(p);
      }
    });

    std::vector<std::vector<double>> pushed;
    pushed.reserve(B * G);
    for (const auto& s : scored) {
      if (s.answer_valid || cfg.push_invalid) {
        const auto x = s.accuracy.as_array();
        pushed.emplace_back(x.begin(), x.end());
      }
    }
    history.push_step(pushed);

    parallel_for(B, cfg.threads, [&](std::size_t b) {
      grpo::RolloutGroup group;
      group.query_id = scenes[b].scene_id;
      std::vector<double> rewards;
      for (std::size_t i = 0; i < G; ++i) {
        group.candidates.push_back(scored[b * G + i].candidate);
        rewards.push_back(scored[b * G + i].candidate.reward);
      }
      const auto adv = grpo::group_advantages(rewards, grpo_cfg);
      terms[b] = grpo::surrogate_terms(group, adv, grpo_cfg);
      auto& grad = group_grads[b];
      grad.assign(policy.parameter_count(), 0.0);
      for (std::size_t i = 0; i < G; ++i) {
        policy.accumulate_gradient(policy.current(), observations[b],
                                   scored[b * G + i].tokens, terms[b].token_weights[i],
                                   grad);
      }
    });

    // Batch objective is the mean of the group objectives; reduce in group
    // order so the result is independent of the thread count.
    std::vector<double> gradient(policy.parameter_count(), 0.0);
    StepRecord rec;
    rec.step = step;
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t k = 0; k < gradient.size(); ++k) gradient[k] += group_grads[b][k] * inv_b;
      rec.objective += terms[b].objective * inv_b;
      rec.kl += terms[b].kl * inv_b;
      rec.clip_fraction += terms[b].clip_fraction * inv_b;
    }
    if (!std::isfinite(rec.objective)) {
      throw NumericalError("non-finite surrogate objective at step " + std::to_string(step));
    }
    for (double g : gradient) {
      if (!std::isfinite(g)) {
        throw NumericalError("non-finite gradient at step " + std::to_string(step));
      }
    }

    double tokens = 0.0;
    double entropy = 0.0;
    const double inv_n = 1.0 / static_cast<double>(B * G);
    for (const auto& s : scored) {
      rec.mean_reward += s.candidate.reward * inv_n;
      rec.mean_fmt += s.fmt.total * inv_n;
      rec.mean_acc += s.acc_reward * inv_n;
      const auto x = s.accuracy.as_array();
      for (std::size_t j = 0; j < 3; ++j) {
        rec.per_component_mean[j] += x[j] * inv_n;
        rec.per_component_quantile_mean[j] += s.quantiles.values[j] * inv_n;
      }
      entropy += s.entropy_sum;
      tokens += static_cast<double>(s.tokens.size());
    }
    rec.mean_entropy = tokens > 0.0 ? entropy / tokens : 0.0;

    optimizer.step(policy.current(), gradient);
    history.flush_step();
    log.steps.push_back(rec);
    if (observer) observer(rec, history);
  }
  policy.snapshot_old();
  return log;
}

std::vector<io::SceneRecord> make_eval_scenes(std::uint64_t seed, std::size_t count,
                                              TaskMix task, const SceneConfig& cfg) {
  std::vector<io::SceneRecord> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto scene = generate_scene(derive_seed(seed, "eval", i),
                                pick_difficulty(task, seed, i, 0), cfg);
    scene.scene_id = "eval-" + std::to_string(i);
    scenes.push_back(scene.record());
  }
  return scenes;
}

PolicyEvaluation evaluate_policy(const ToyPolicy& policy,
                                 std::span<const io::SceneRecord> scenes,
                                 std::uint64_t evidence_seed,
                                 const EvidenceConfig& evidence,
                                 const metrics::DistanceThresholds& thr,
                                 std::size_t threads) {
  PolicyEvaluation out;
  out.predictions.resize(scenes.size());
  std::vector<AnswerPayload> payloads(scenes.size());
  std::vector<GroundTruth> gts(scenes.size());
  parallel_for(scenes.size(), threads, [&](std::size_t i) {
    const auto obs = observe(scenes[i], derive_seed(evidence_seed, "evidence", i),
                             evidence, policy.shape());
    const auto tokens = policy.greedy(policy.current(), obs);
    auto& pred = out.predictions[i];
    pred.scene_id = scenes[i].scene_id;
    pred.text = render_tokens(tokens, policy.shape());
    payloads[i] = payload_of(grammar::parse_response(pred.text), pred.valid);
    pred.payload = payloads[i];
    gts[i] = scenes[i].gt;
  });
  out.report = metrics::evaluate_predictions(payloads, gts, thr);
  return out;
}

}  // namespace rank_reward::env
