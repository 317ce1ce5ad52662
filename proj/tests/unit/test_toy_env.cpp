#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "../support/oracles.hpp"
#include "rank_reward/errors.hpp"
#include "rank_reward/response_grammar.hpp"
#include "rank_reward/toy_env.hpp"
#include "rank_reward/toy_policy.hpp"
#include "rank_reward/training.hpp"

using namespace rank_reward;
using namespace rank_reward::env;

TEST(GenerateScene, DeterministicAndWellFormed) {
  EXPECT_EQ(generate_scene(42, Difficulty::Multi).record(),
            generate_scene(42, Difficulty::Multi).record());
  EXPECT_EQ(generate_scene(42, Difficulty::Single).gt.size(), 1u);
  for (std::uint64_t s = 0; s < 500; ++s) {
    const auto scene = generate_scene(s, s % 2 ? Difficulty::Multi : Difficulty::Single);
    ASSERT_EQ(scene.gt.boxes.size(), scene.gt.points.size());
    for (std::size_t k = 0; k < scene.gt.size(); ++k) {
      const auto& b = scene.gt.boxes[k];
      const auto& p = scene.gt.points[k];
      ASSERT_GE(b.x1, 0.0);
      ASSERT_GE(b.y1, 0.0);
      ASSERT_LE(b.x2, scene.width);
      ASSERT_LE(b.y2, scene.height);
      ASSERT_GE(b.area(), 100.0);
      ASSERT_TRUE(p.x >= b.x1 && p.x <= b.x2 && p.y >= b.y1 && p.y <= b.y2);
    }
  }
}

TEST(GenerateScene, MultiCountHistogramCoversTwoToSix) {
  std::map<std::size_t, int> hist;
  for (std::uint64_t s = 0; s < 10000; ++s) hist[generate_scene(s, Difficulty::Multi).gt.size()]++;
  for (std::size_t n = 2; n <= 6; ++n) EXPECT_GE(hist[n], 500) << n;
  EXPECT_EQ(hist[0] + hist[1], 0);
  EXPECT_EQ(hist.rbegin()->first, 6u);
}

TEST(ToyPolicy, SamplesRenderToWellFormedResponses) {
  PolicyShape shape;
  ToyPolicy policy(shape, 1, 0.5);
  Rng rng(3);
  for (int t = 0; t < 300; ++t) {
    const auto scene = generate_scene(t, Difficulty::Multi);
    const auto obs = observe(scene.record(), t, {}, shape);
    const auto tokens = policy.sample(policy.old(), obs, rng);
    const auto text = render_tokens(tokens, shape);
    const auto score = grammar::score_format(grammar::parse_response(text));
    ASSERT_EQ(score.r_think, 1.0) << text;
    ASSERT_EQ(score.r_ans, 1.0) << text;
    const auto decoded = decode_objects(tokens, shape);
    const auto parsed = grammar::validate_answer(*grammar::parse_response(text).answer_text);
    ASSERT_EQ(std::get<AnswerPayload>(parsed).objects.size(), decoded.size());
    if (!decoded.empty()) ASSERT_EQ(score.r_look, 1.0) << text;
  }
}

TEST(ToyPolicy, NoLookTokensWhenDisabled) {
  PolicyShape shape;
  shape.look_enabled = false;
  ToyPolicy policy(shape, 1, 0.5);
  Rng rng(3);
  const auto obs = observe(generate_scene(1, Difficulty::Multi).record(), 1, {}, shape);
  for (int t = 0; t < 50; ++t) {
    const auto text = render_tokens(policy.sample(policy.current(), obs, rng), shape);
    EXPECT_EQ(text.find("<look>"), std::string::npos);
  }
}

TEST(ToyPolicy, LogprobsMatchDistributions) {
  PolicyShape shape;
  ToyPolicy policy(shape, 5, 0.7);
  Rng rng(9);
  const auto obs = observe(generate_scene(2, Difficulty::Multi).record(), 2, {}, shape);
  const auto tokens = policy.sample(policy.current(), obs, rng);
  const auto lp = policy.token_logprobs(policy.current(), obs, tokens);
  const auto dists = policy.token_distributions(policy.current(), obs, tokens);
  ASSERT_EQ(lp.size(), tokens.size());
  ASSERT_EQ(dists.size(), tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    double sum = 0.0;
    for (double p : dists[t]) sum += p;
    ASSERT_NEAR(sum, 1.0, 1e-12);
    ASSERT_NEAR(lp[t], std::log(dists[t][tokens[t].choice]), 1e-12);
    const auto hd = policy.head_distribution(policy.current(), obs, tokens[t].head, tokens[t].slot);
    ASSERT_EQ(hd, dists[t]);
  }
}

TEST(ToyPolicy, SamplingFrequenciesPassChiSquare) {
  PolicyShape shape;
  ToyPolicy policy(shape, 12, 0.8);
  const auto obs = observe(generate_scene(4, Difficulty::Multi).record(), 4, {}, shape);
  const auto probs = policy.head_distribution(policy.current(), obs, Head::CenterX, 0);
  const auto stop = policy.head_distribution(policy.current(), obs, Head::Stop, 0);
  Rng rng(77);
  std::vector<long> counts(probs.size(), 0);
  long emitted = 0;
  for (int t = 0; t < 100000; ++t) {
    const auto tokens = policy.sample(policy.current(), obs, rng);
    for (const auto& tok : tokens) {
      if (tok.head == Head::CenterX && tok.slot == 0) {
        counts[tok.choice]++;
        ++emitted;
      }
    }
  }
  // The first slot emits an object with probability stop[0].
  EXPECT_NEAR(emitted / 1e5, stop[0], 3.0 * std::sqrt(stop[0] * (1 - stop[0]) / 1e5) + 1e-9);
  std::size_t bins = 0;
  for (double p : probs) bins += p > 0 ? 1 : 0;
  const double chi = oracle::chi_square(counts, probs);
  // 99.9% quantile of chi-square with 20 degrees of freedom is 45.3.
  ASSERT_EQ(bins, 21u);
  EXPECT_LT(chi, 45.3);
}

TEST(ToyPolicy, OneHotOldPolicyGivesIdenticalCandidates) {
  PolicyShape shape;
  ToyPolicy policy(shape, 1, 0.0);
  // The bias feature is active in every slot; a large bias weight on one
  // choice per head makes every head effectively deterministic.
  for (const auto& block : policy.blocks()) {
    for (std::size_t r = 0; r < block.rows; ++r) {
      policy.old_mutable()[block.offset + r * block.cols] = (r == 0) ? 800.0 : -800.0;
    }
  }
  const auto obs = observe(generate_scene(3, Difficulty::Multi).record(), 3, {}, shape);
  const auto g = sample_group(policy, obs, 8, 99, "q");
  ASSERT_EQ(g.group.candidates.size(), 8u);
  for (const auto& c : g.group.candidates) EXPECT_EQ(c.response, g.group.candidates[0].response);
}

TEST(ToyPolicy, SampleGroupCarriesAllSnapshots) {
  PolicyShape shape;
  ToyPolicy policy(shape, 1, 0.3);
  policy.current()[0] += 0.5;
  const auto obs = observe(generate_scene(3, Difficulty::Multi).record(), 3, {}, shape);
  const auto a = sample_group(policy, obs, 4, 5, "q");
  const auto b = sample_group(policy, obs, 4, 5, "q");
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a.group.candidates[i].response, b.group.candidates[i].response);
    EXPECT_EQ(a.group.candidates[i].logp_new,
              policy.token_logprobs(policy.current(), obs, a.tokens[i]));
    EXPECT_EQ(a.group.candidates[i].logp_old, policy.token_logprobs(policy.old(), obs, a.tokens[i]));
  }
}

TEST(ToyPolicy, JsonRoundTrip) {
  PolicyShape shape;
  ToyPolicy policy(shape, 1, 0.3);
  const auto restored = policy_from_json(policy_to_json(policy));
  EXPECT_EQ(restored.shape(), policy.shape());
  EXPECT_EQ(restored.current(), policy.current());
  EXPECT_THROW(policy_from_json(R"({"format":"other","version":1})"), FormatError);
}

TEST(Training, SmokeOneStepEveryMode) {
  for (auto mode : {RewardMode::Binary, RewardMode::RawSum, RewardMode::DistributionRanked}) {
    TrainRunConfig cfg;
    cfg.steps = 1;
    cfg.reward_mode = mode;
    const auto log = run_training(cfg);
    ASSERT_EQ(log.steps.size(), 1u);
    const auto& r = log.steps[0];
    EXPECT_TRUE(std::isfinite(r.mean_entropy));
    EXPECT_TRUE(std::isfinite(r.mean_reward));
    EXPECT_NEAR(r.mean_reward, r.mean_fmt + r.mean_acc, 1e-9);
  }
}

TEST(Training, ZeroLearningRateKeepsParameters) {
  TrainRunConfig cfg;
  cfg.steps = 3;
  cfg.learning_rate = 0.0;
  cfg.init_scale = 0.1;
  const auto log = run_training(cfg);
  const ToyPolicy initial(log.policy.shape(), derive_seed(cfg.seed, "init"), cfg.init_scale);
  EXPECT_EQ(log.policy.current(), initial.current());
}

TEST(Training, DeterministicAcrossRunsAndThreads) {
  TrainRunConfig cfg;
  cfg.steps = 4;
  cfg.seed = 5;
  cfg.task = TaskMix::Mixed;
  const auto a = run_training(cfg);
  cfg.threads = 3;
  const auto b = run_training(cfg);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_EQ(step_record_to_json(a.steps[i]), step_record_to_json(b.steps[i]));
  }
  EXPECT_EQ(a.policy.current(), b.policy.current());
}

TEST(Training, ConservationAndEntropyBounds) {
  TrainRunConfig cfg;
  cfg.steps = 10;
  std::vector<std::size_t> pending;
  const auto log = run_training(cfg, [&](const StepRecord&, const quantile::MetricHistory& h) {
    pending.push_back(h.pending());
  });
  const double bound = std::log(static_cast<double>(log.policy.shape().max_vocab()));
  for (const auto& r : log.steps) {
    EXPECT_NEAR(r.mean_reward, r.mean_fmt + r.mean_acc, 1e-9);
    EXPECT_GE(r.mean_entropy, 0.0);
    EXPECT_LE(r.mean_entropy, bound);
    EXPECT_EQ(r.clip_fraction, 0.0);
  }
  for (auto p : pending) EXPECT_EQ(p, 0u);
}

TEST(Training, ModeDoesNotAffectFirstStepRollouts) {
  TrainRunConfig cfg;
  cfg.steps = 1;
  cfg.reward_mode = RewardMode::Binary;
  std::array<double, 3> binary{};
  run_training(cfg, [&](const StepRecord& r, const quantile::MetricHistory&) { binary = r.per_component_mean; });
  cfg.reward_mode = RewardMode::DistributionRanked;
  std::array<double, 3> ranked{};
  run_training(cfg, [&](const StepRecord& r, const quantile::MetricHistory&) { ranked = r.per_component_mean; });
  EXPECT_EQ(binary, ranked);
}

TEST(Training, ConfigValidation) {
  TrainRunConfig cfg;
  cfg.steps = 0;
  EXPECT_THROW(run_training(cfg), ConfigError);
  cfg = {};
  cfg.group_size = 1;
  EXPECT_THROW(run_training(cfg), ConfigError);
  cfg = {};
  cfg.scene.max_objects = 9;
  EXPECT_THROW(run_training(cfg), ConfigError);
}

TEST(Training, BinaryAccuracyCutoffs) {
  EXPECT_EQ(binary_accuracy_reward({0.5, 1.0, 1.0}), 1.0);
  EXPECT_NEAR(binary_accuracy_reward({0.49, 1.0, 0.99}), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(binary_accuracy_reward({0.0, 0.5, 0.0}), 0.0);
  EXPECT_NEAR(raw_sum_accuracy_reward({0.3, 0.6, 0.9}), 0.6, 1e-15);
}

TEST(Evaluation, GreedyPolicyThroughTextPath) {
  TrainRunConfig cfg;
  cfg.steps = 2;
  const auto log = run_training(cfg);
  const auto scenes = make_eval_scenes(11, 20, TaskMix::Multi);
  ASSERT_EQ(scenes.size(), 20u);
  EXPECT_EQ(scenes, make_eval_scenes(11, 20, TaskMix::Multi));
  const auto a = evaluate_policy(log.policy, scenes, 3, {}, {}, 1);
  const auto b = evaluate_policy(log.policy, scenes, 3, {}, {}, 4);
  ASSERT_EQ(a.predictions.size(), 20u);
  EXPECT_EQ(a.report.giou, b.report.giou);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(a.predictions[i].scene_id, scenes[i].scene_id);
    EXPECT_TRUE(a.predictions[i].valid);
    EXPECT_EQ(a.predictions[i].text, b.predictions[i].text);
  }
}
