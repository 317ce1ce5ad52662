#include "rank_reward_cli/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rank_reward/bias_lab.hpp"
#include "rank_reward/errors.hpp"
#include "rank_reward/perception_metrics.hpp"
#include "rank_reward/quantile_service.hpp"
#include "rank_reward/random.hpp"
#include "rank_reward/response_grammar.hpp"
#include "rank_reward/scene_io.hpp"
#include "rank_reward/toy_policy.hpp"
#include "rank_reward/training.hpp"
#include "rank_reward_cli/settings.hpp"

namespace rank_reward::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kThreadsEnv = "RANK_REWARD_LAB_THREADS";
constexpr std::size_t kBiasMinSamples = 10'000;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output_dir = "rank_reward_out";
  std::vector<std::string> overrides;
  std::optional<std::size_t> threads;
};

struct Context {
  Settings settings;
  fs::path output_dir;
  std::size_t threads = 1;
  std::ostream& out;
  std::ostream& err;
};

std::size_t resolve_threads(const std::optional<std::size_t>& flag) {
  if (flag) {
    if (*flag < 1) throw ConfigError("--threads must be >= 1");
    return *flag;
  }
  if (const char* env = std::getenv(kThreadsEnv); env && *env) {
    std::size_t v = 0;
    std::istringstream is(env);
    if (!(is >> v) || !is.eof() || v < 1) {
      throw ConfigError(std::string(kThreadsEnv) + " must be a positive integer, got '" + env + "'");
    }
    return v;
  }
  return 1;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << content;
  if (!f) throw ConfigError("failed writing " + path.string());
}

std::ifstream open_input(const std::string& path, const std::string& what) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError(what + " file not found: " + path);
  return f;
}

Context make_context(const CommonArgs& args, std::ostream& out, std::ostream& err) {
  Context ctx{Settings{}, fs::path(args.output_dir), resolve_threads(args.threads), out, err};
  if (!args.config.empty()) ctx.settings.load_file(args.config);
  for (const auto& o : args.overrides) ctx.settings.apply_override(o);
  if (args.seed) ctx.settings.set("run", "seed", std::to_string(*args.seed));
  ctx.settings.seed();  // fail fast on a malformed seed
  std::error_code ec;
  fs::create_directories(ctx.output_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + ctx.output_dir.string() + ": " + ec.message());
  write_file(ctx.output_dir / "resolved_config.ini", ctx.settings.resolved_ini());
  return ctx;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

int cmd_train(Context& ctx) {
  const auto cfg = ctx.settings.train_config();
  const std::size_t eval_count = ctx.settings.eval_scene_count();
  env::TrainRunConfig run = cfg;
  run.threads = ctx.threads;

  std::ostringstream log;
  const auto observer = [&](const env::StepRecord& r, const quantile::MetricHistory&) {
    log << env::step_record_to_json(r) << '\n';
  };
  const auto episode = env::run_training(run, observer);
  write_file(ctx.output_dir / "episode_log.jsonl", log.str());
  write_file(ctx.output_dir / "policy.json", env::policy_to_json(episode.policy) + "\n");

  const auto scenes = env::make_eval_scenes(derive_seed(cfg.seed, "heldout"), eval_count,
                                            cfg.task, cfg.scene);
  const auto eval = env::evaluate_policy(episode.policy, scenes,
                                         derive_seed(cfg.seed, "heldout_evidence"),
                                         cfg.evidence, cfg.thresholds, ctx.threads);
  {
    std::ostringstream os;
    io::write_scenes(os, scenes);
    write_file(ctx.output_dir / "eval_scenes.jsonl", os.str());
  }
  {
    std::ostringstream os;
    for (const auto& p : eval.predictions) os << io::prediction_to_json(p) << '\n';
    write_file(ctx.output_dir / "eval_predictions.jsonl", os.str());
  }

  const auto& last = episode.steps.back();
  nlohmann::ordered_json summary;
  summary["reward_mode"] = std::string(env::to_string(cfg.reward_mode));
  summary["seed"] = cfg.seed;
  summary["steps"] = cfg.steps;
  summary["final_component_mean"] = last.per_component_mean;
  summary["final_mean_reward"] = last.mean_reward;
  summary["final_mean_entropy"] = last.mean_entropy;
  summary["heldout_scenes"] = eval_count;
  summary["heldout_giou"] = eval.report.giou;
  summary["heldout_mean_accuracy"] = eval.report.mean_accuracy.as_array();
  summary["heldout_count_accuracy"] = eval.report.count_accuracy;
  write_file(ctx.output_dir / "summary.json", summary.dump(2) + "\n");

  ctx.out << "train " << env::to_string(cfg.reward_mode) << " steps=" << cfg.steps
          << " final x1=" << format_double(last.per_component_mean[0])
          << " x2=" << format_double(last.per_component_mean[1])
          << " x3=" << format_double(last.per_component_mean[2])
          << " heldout_giou=" << format_double(eval.report.giou) << '\n';
  return kExitOk;
}

int cmd_bias_demo(Context& ctx) {
  const auto scenarios = ctx.settings.scenarios();
  const std::size_t samples = ctx.settings.get_size("bias", "samples");
  if (samples < 2) throw ConfigError("bias.samples must be >= 2");
  if (samples < kBiasMinSamples) {
    ctx.err << "warning: bias.samples=" << samples << " is below " << kBiasMinSamples
            << "; Monte-Carlo standard errors exceed the lab tolerances\n";
  }
  std::vector<lab::ScenarioResult> results;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    results.push_back(lab::run_scenario(scenarios[i], i, samples, ctx.settings.seed(), ctx.threads));
  }
  write_file(ctx.output_dir / "bias_report.csv", lab::report_csv(results));
  if (ctx.settings.get_bool("bias", "svg")) {
    write_file(ctx.output_dir / "bias_shares.svg", lab::shares_svg(results));
  }
  for (const auto& r : results) {
    const bool multi = r.raw_sum.share.size() >= 2;
    ctx.out << "bias-demo " << r.scenario.name << " raw_sum_dominance="
            << (multi ? format_double(lab::dominance_ratio(r.raw_sum)) : "n/a")
            << " quantile_ranked_dominance="
            << (multi ? format_double(lab::dominance_ratio(r.quantile_ranked)) : "n/a") << '\n';
  }
  return kExitOk;
}

int cmd_eval(Context& ctx, const std::string& predictions_path, const std::string& gt_path) {
  if (predictions_path.empty() || gt_path.empty()) {
    throw ConfigError("eval requires --predictions and --ground-truth");
  }
  const auto thresholds = ctx.settings.train_config().thresholds;
  auto gt_in = open_input(gt_path, "ground-truth");
  const auto scenes = io::read_scenes(gt_in);
  auto pred_in = open_input(predictions_path, "predictions");
  const auto preds = io::read_predictions(pred_in);

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < scenes.size(); ++i) index[scenes[i].scene_id] = i;
  std::vector<AnswerPayload> payloads(scenes.size());
  std::vector<bool> seen(scenes.size(), false);
  std::vector<bool> valid(scenes.size(), true);
  for (const auto& p : preds) {
    const auto it = index.find(p.scene_id);
    if (it == index.end()) {
      throw FormatError("prediction for unknown scene_id '" + p.scene_id + "'");
    }
    payloads[it->second] = p.payload;
    valid[it->second] = p.valid;
    seen[it->second] = true;
  }
  std::size_t missing = 0;
  for (bool s : seen) missing += s ? 0 : 1;
  if (missing > 0) {
    ctx.err << "warning: " << missing << " scene(s) have no prediction and score as empty\n";
  }
  std::vector<GroundTruth> gts;
  for (const auto& s : scenes) gts.push_back(s.gt);
  const auto report = metrics::evaluate_predictions(payloads, gts, thresholds);

  std::ostringstream csv;
  csv << "scene_id,n_pred,n_gt,valid,giou,x1,x2,x3\n";
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const double scene_giou = metrics::giou_eval({&payloads[i], 1}, {&gts[i], 1});
    const auto& x = report.per_scene[i];
    csv << csv_escape(scenes[i].scene_id) << ',' << payloads[i].objects.size() << ','
        << gts[i].size() << ',' << (valid[i] ? 1 : 0) << ',' << format_double(scene_giou)
        << ',' << format_double(x.x1) << ',' << format_double(x.x2) << ','
        << format_double(x.x3) << '\n';
  }
  write_file(ctx.output_dir / "eval_per_scene.csv", csv.str());
  ctx.out << "eval scenes=" << scenes.size() << " giou=" << format_double(report.giou)
          << " x1=" << format_double(report.mean_accuracy.x1)
          << " x2=" << format_double(report.mean_accuracy.x2)
          << " x3=" << format_double(report.mean_accuracy.x3)
          << " count_accuracy=" << format_double(report.count_accuracy) << '\n';
  return kExitOk;
}

void append_snapshot(std::ostringstream& csv, std::uint64_t step,
                     const quantile::MetricHistory& history) {
  for (std::size_t d = 0; d < history.dimensions(); ++d) {
    const auto s = history.summary(d);
    csv << step << ',' << d << ',' << format_double(s.p10) << ',' << format_double(s.p50)
        << ',' << format_double(s.p90) << ',' << format_double(s.mean) << '\n';
  }
}

int cmd_quantile_snapshot(Context& ctx, const std::string& input) {
  std::ostringstream csv;
  csv << "step,dimension,p10,p50,p90,mean\n";
  const std::size_t capacity = ctx.settings.get_size("quantile", "capacity");
  std::size_t steps = 0;
  if (input.empty()) {
    auto run = ctx.settings.train_config();
    run.threads = ctx.threads;
    env::run_training(run, [&](const env::StepRecord& r, const quantile::MetricHistory& h) {
      append_snapshot(csv, r.step, h);
    });
    steps = run.steps;
  } else {
    auto in = open_input(input, "quantile input");
    std::vector<std::pair<std::int64_t, std::vector<double>>> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        records.emplace_back(j.at("step").get<std::int64_t>(), j.at("x").get<std::vector<double>>());
      } catch (const nlohmann::json::exception& e) {
        throw FormatError("line " + std::to_string(line_no) + ": expected {\"step\", \"x\"}: " + e.what());
      }
      if (records.size() > 1 && records.back().first < records[records.size() - 2].first) {
        throw FormatError("line " + std::to_string(line_no) + ": steps must be non-decreasing");
      }
    }
    if (records.empty()) throw FormatError("quantile input is empty");
    quantile::MetricHistory history(records.front().second.size(), capacity);
    std::size_t i = 0;
    while (i < records.size()) {
      const auto step = records[i].first;
      std::vector<std::vector<double>> batch;
      for (; i < records.size() && records[i].first == step; ++i) batch.push_back(records[i].second);
      history.push_step(batch);
      history.flush_step();
      append_snapshot(csv, static_cast<std::uint64_t>(step), history);
      ++steps;
    }
  }
  write_file(ctx.output_dir / "quantile_snapshot.csv", csv.str());
  ctx.out << "quantile-snapshot steps=" << steps << " capacity=" << capacity << '\n';
  return kExitOk;
}

int cmd_parse_check(Context& ctx, const std::string& corpus) {
  std::string path = corpus;
#ifdef RANK_REWARD_DEFAULT_CORPUS
  if (path.empty()) path = RANK_REWARD_DEFAULT_CORPUS;
#endif
  if (path.empty()) throw ConfigError("parse-check requires --corpus");
  auto in = open_input(path, "corpus");
  grammar::FormatConfig fmt;
  fmt.ngram = ctx.settings.get_size("format", "ngram");
  fmt.repetition_threshold = ctx.settings.get_double("format", "repetition_threshold");
  fmt.score_look = ctx.settings.get_bool("train", "look_format");

  std::ostringstream csv;
  csv << "case,r_look,r_think,r_ans,r_nr,total,pass\n";
  std::size_t pass = 0;
  std::size_t fail = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string name;
    std::string text;
    std::array<double, 4> expected{};
    try {
      const auto j = nlohmann::json::parse(line);
      name = j.value("name", "line " + std::to_string(line_no));
      text = j.at("text").get<std::string>();
      const auto& e = j.at("expected");
      expected = {e.at("r_look").get<double>(), e.at("r_think").get<double>(),
                  e.at("r_ans").get<double>(), e.at("r_nr").get<double>()};
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    const auto score = grammar::score_format(grammar::parse_response(text), fmt);
    const std::array<double, 4> got = {score.r_look, score.r_think, score.r_ans, score.r_nr};
    const bool ok = got == expected;
    (ok ? pass : fail) += 1;
    if (!ok) {
      ctx.out << "FAIL " << name << ": expected (" << expected[0] << ',' << expected[1] << ','
              << expected[2] << ',' << expected[3] << ") got (" << got[0] << ',' << got[1]
              << ',' << got[2] << ',' << got[3] << ")\n";
    }
    csv << csv_escape(name) << ',' << got[0] << ',' << got[1] << ',' << got[2] << ','
        << got[3] << ',' << score.total << ',' << (ok ? 1 : 0) << '\n';
  }
  write_file(ctx.output_dir / "parse_check.csv", csv.str());
  if (pass + fail == 0) ctx.err << "warning: corpus " << path << " has no cases\n";
  ctx.out << "parse-check pass=" << pass << " fail=" << fail << '\n';
  return fail == 0 ? kExitOk : kExitFailure;
}

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config, "INI config file");
  sub->add_option("--seed", args.seed, "Root seed (overrides run.seed)");
  sub->add_option("--output-dir", args.output_dir, "Directory for all outputs");
  sub->add_option("--override", args.overrides, "key=value or section.key=value")
      ->take_all();
  sub->add_option("--threads", args.threads,
                  std::string("Worker cap (fallback: ") + kThreadsEnv + ")");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distribution-ranked reward lab: GRPO toy training, bias lab, evaluation"};
  app.require_subcommand(1);
  CommonArgs args;
  std::string predictions;
  std::string ground_truth;
  std::string corpus;
  std::string input;

  auto* train = app.add_subcommand("train", "Train the toy policy and evaluate it on held-out scenes");
  auto* bias = app.add_subcommand("bias-demo", "Monte-Carlo gradient contribution shares");
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  auto* snapshot = app.add_subcommand("quantile-snapshot", "Per-step metric history percentiles");
  auto* parse = app.add_subcommand("parse-check", "Score a format corpus against expectations");
  for (auto* sub : {train, bias, eval, snapshot, parse}) add_common(sub, args);
  eval->add_option("--predictions", predictions, "Predictions JSONL");
  eval->add_option("--ground-truth", ground_truth, "Ground-truth JSONL");
  snapshot->add_option("--input", input, "JSONL of {\"step\", \"x\"} records; trains live when absent");
  parse->add_option("--corpus", corpus, "Corpus JSONL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::ostringstream os;
    const int code = app.exit(e, os, os);
    if (code == 0) {
      out << os.str();
      return kExitOk;
    }
    err << os.str();
    return kExitConfig;
  }

  try {
    Context ctx = make_context(args, out, err);
    if (train->parsed()) return cmd_train(ctx);
    if (bias->parsed()) return cmd_bias_demo(ctx);
    if (eval->parsed()) return cmd_eval(ctx, predictions, ground_truth);
    if (snapshot->parsed()) return cmd_quantile_snapshot(ctx, input);
    return cmd_parse_check(ctx, corpus);
  } catch (const NumericalError& e) {
    err << "error: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace rank_reward::cli
