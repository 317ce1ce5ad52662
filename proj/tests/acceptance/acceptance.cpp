// Acceptance runner: one PASS/FAIL line per criterion, exit 1 on any FAIL.
// Usage: acceptance [--workdir DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "../support/grad_check.hpp"
#include "../support/oracles.hpp"
#include "rank_reward/bias_lab.hpp"
#include "rank_reward/grpo_engine.hpp"
#include "rank_reward/perception_metrics.hpp"
#include "rank_reward/quantile_service.hpp"
#include "rank_reward/random.hpp"
#include "rank_reward_cli/cli.hpp"

namespace fs = std::filesystem;
using namespace rank_reward;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int g_failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ' ' << detail << std::endl;
  if (!ok) ++g_failures;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int invoke(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "rank_reward_lab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (code != 0) std::cerr << err.str();
  return code;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------

void bias_mechanism() {
  const auto t0 = Clock::now();
  const auto r = lab::run_scenario(lab::default_scenario(), 0, 1'000'000, 0, 1);
  const double secs = seconds_since(t0);
  const double raw = lab::dominance_ratio(r.raw_sum);
  const double qr = lab::dominance_ratio(r.quantile_ranked);
  report(raw >= 8.5 && raw <= 11.5 && qr <= 1.5 && secs < 10.0, "bias_mechanism",
         "raw_sum_dominance=" + fmt(raw) + " quantile_ranked_dominance=" + fmt(qr) +
             " seconds=" + fmt(secs));
}

void quantile_properties() {
  const auto t0 = Clock::now();
  std::size_t failures = 0;
  std::string first;
  const auto fail = [&](std::size_t c, const std::string& what) {
    if (failures++ == 0) first = "case " + std::to_string(c) + ": " + what;
  };
  constexpr int kGrid = 256;
  for (std::size_t c = 0; c < 10'000; ++c) {
    Rng rng(derive_seed(7, "quantile_property", c));
    const auto capacity = static_cast<std::size_t>(rng.uniform_int(1, 48));
    quantile::MetricHistory plain(1, capacity);
    quantile::MetricHistory squared(1, capacity);
    std::deque<double> mirror(capacity, 0.0);
    const auto steps = rng.uniform_int(1, 6);
    for (int s = 0; s < steps; ++s) {
      const auto n = rng.uniform_int(0, 2 * static_cast<int>(capacity));
      std::vector<std::vector<double>> a, b;
      for (int k = 0; k < n; ++k) {
        const double v = rng.uniform_int(0, kGrid) / double(kGrid);
        a.push_back({v});
        b.push_back({v * v});
      }
      plain.push_step(a);
      squared.push_step(b);
      // Buffered values must stay invisible until the flush.
      const auto before = plain.contents(0);
      if (!std::equal(before.begin(), before.end(), mirror.begin(), mirror.end())) {
        fail(c, "buffer leaked into queue");
      }
      plain.flush_step();
      squared.flush_step();
      for (const auto& v : a) {
        mirror.push_back(v[0]);
        mirror.pop_front();
      }
    }
    const auto stored = plain.contents(0);
    if (!std::equal(stored.begin(), stored.end(), mirror.begin(), mirror.end())) {
      fail(c, "FIFO contents differ");
    }
    const std::vector<double> model(mirror.begin(), mirror.end());
    double prev = -1.0;
    for (int g = 0; g <= kGrid + 1; ++g) {
      const double x = g <= kGrid ? g / double(kGrid) : 1.5;
      const double q = plain.quantile(0, x);
      if (q != oracle::indicator_quantile(model, x)) fail(c, "quantile differs from oracle");
      if (!(q >= 0.0 && q <= 1.0)) fail(c, "quantile outside [0, 1]");
      if (q < prev) fail(c, "quantile not monotone");
      if (x <= 1.0 && squared.quantile(0, x * x) != q) fail(c, "not invariant under x^2");
      prev = q;
    }
    if (plain.quantile(0, -1.0) != 0.0 || plain.quantile(0, 1.0) != 1.0) fail(c, "bounds");
  }
  report(failures == 0, "quantile_properties",
         "cases=10000 failures=" + std::to_string(failures) + " seconds=" + fmt(seconds_since(t0)) +
             (first.empty() ? "" : " first=\"" + first + "\""));
}

void advantage_suite() {
  grpo::GrpoConfig cfg;
  double worst_mean = 0.0;
  double worst_std = 0.0;
  double worst_oracle = 0.0;
  bool exact = true;
  bool degenerate_ok = true;
  Rng rng(11);
  for (int t = 0; t < 1000; ++t) {
    const auto g = static_cast<std::size_t>(rng.uniform_int(2, 16));
    std::vector<double> r(g);
    for (auto& v : r) v = rng.uniform(-3.0, 5.0);
    const auto a = grpo::group_advantages(r, cfg);
    long double m = 0, s = 0;
    for (double v : a) m += v;
    m /= g;
    for (double v : a) s += (v - m) * (v - m);
    worst_mean = std::max(worst_mean, double(std::fabs(m)));
    worst_std = std::max(worst_std, double(std::fabs(std::sqrt(s / g) - 1.0L)));
    const auto d = oracle::direct_advantages(r, cfg.adv_std_floor);
    for (std::size_t i = 0; i < g; ++i) worst_oracle = std::max(worst_oracle, std::fabs(a[i] - d[i]));

    // Dyadic rewards with a power-of-two group: every operation is exact, so
    // shifted and scaled groups reproduce the advantages bit for bit.
    std::vector<double> dy(8);
    for (auto& v : dy) v = rng.uniform_int(0, 64) / 16.0;
    const auto base = grpo::group_advantages(dy, cfg);
    const double shift = rng.uniform_int(-8, 8) / 4.0;
    const double scale = std::ldexp(1.0, static_cast<int>(rng.uniform_int(-4, 4)) * 2);
    std::vector<double> sh(dy), sc(dy);
    for (auto& v : sh) v += shift;
    for (auto& v : sc) v *= scale;
    if (grpo::group_advantages(sh, cfg) != base || grpo::group_advantages(sc, cfg) != base) exact = false;

    const std::vector<double> flat(g, rng.uniform(-2.0, 2.0));
    const auto z = grpo::group_advantages(flat, cfg);
    if (std::any_of(z.begin(), z.end(), [](double v) { return v != 0.0; })) degenerate_ok = false;
  }
  const bool ok = worst_mean <= 1e-9 && worst_std <= 1e-9 && worst_oracle <= 1e-9 && exact && degenerate_ok;
  report(ok, "advantage_suite",
         "groups=1000 max_mean=" + fmt(worst_mean) + " max_std_err=" + fmt(worst_std) +
             " max_vs_direct=" + fmt(worst_oracle) + " shift_scale_exact=" + (exact ? "1" : "0") +
             " degenerate_zero=" + (degenerate_ok ? "1" : "0"));
}

void gradient_check() {
  double worst = 0.0;
  std::size_t clipped = 0;
  std::size_t total = 0;
  for (double beta : {0.0, 0.01}) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto r = gradcheck::run(1000 + s, beta);
      worst = std::max(worst, r.rel_error);
      clipped += r.clipped;
      total += r.candidates;
    }
  }
  report(worst <= 1e-4, "gradient_check",
         "points=40 max_rel_error=" + fmt(worst) + " clipped_candidates=" + std::to_string(clipped) +
             "/" + std::to_string(total));
}

BBox random_box(Rng& rng, int extent) {
  const auto x1 = rng.uniform_int(0, extent);
  const auto y1 = rng.uniform_int(0, extent);
  const auto x2 = rng.uniform_int(x1, extent);
  const auto y2 = rng.uniform_int(y1, extent);
  return {double(x1), double(y1), double(x2), double(y2)};
}

void metric_oracles() {
  Rng rng(23);
  double worst_iou = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto a = random_box(rng, 48);
    const auto b = random_box(rng, 48);
    worst_iou = std::max(worst_iou, std::fabs(metrics::iou(a, b) - oracle::raster_iou(a, b)));
  }
  std::size_t match_fail = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto np = rng.uniform_int(0, 6);
    const auto ng = rng.uniform_int(0, 6);
    std::vector<ObjectPrediction> preds;
    GroundTruth gt;
    for (int i = 0; i < np; ++i) preds.push_back({random_box(rng, 20), {0, 0}});
    for (int j = 0; j < ng; ++j) {
      gt.boxes.push_back(random_box(rng, 20));
      gt.points.push_back({0, 0});
    }
    if (metrics::match_objects(preds, gt) != oracle::brute_force_match(preds, gt)) ++match_fail;
  }
  const metrics::DistanceThresholds thr;
  const double mid = 0.5 * (thr.tau_min + thr.tau_max);
  const bool soft_ok = metrics::soft_distance(thr.tau_min, thr) == 1.0 &&
                       metrics::soft_distance(mid, thr) == 0.5 &&
                       metrics::soft_distance(thr.tau_max, thr) == 0.0;
  report(worst_iou <= 1e-6 && match_fail == 0 && soft_ok, "metric_oracles",
         "iou_max_err=" + fmt(worst_iou) + " match_mismatches=" + std::to_string(match_fail) +
             "/1000 soft_distance_exact=" + (soft_ok ? "1" : "0"));
}

void format_corpus(const fs::path& work) {
  std::string out;
  const int code = invoke({"parse-check", "--output-dir", (work / "parse_check").string()}, &out);
  const bool ok = code == 0 && out.find("pass=20 fail=0") != std::string::npos;
  std::string line = out.substr(out.rfind("parse-check"));
  if (!line.empty() && line.back() == '\n') line.pop_back();
  report(ok, "format_corpus", "exit=" + std::to_string(code) + " " + line);
}

struct EntropyShape {
  double drop = 0.0;     // largest fall below an earlier peak
  double rebound = 0.0;  // largest rise above an earlier trough
};

// Shape of a 15-step moving average of the entropy trace.
EntropyShape entropy_shape(const std::vector<double>& h) {
  constexpr std::size_t w = 15;
  std::vector<double> ma;
  double acc = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    acc += h[i];
    if (i >= w) acc -= h[i - w];
    if (i + 1 >= w) ma.push_back(acc / w);
  }
  EntropyShape s;
  if (ma.empty()) return s;
  double peak = ma[0], trough = ma[0];
  for (double v : ma) {
    s.drop = std::max(s.drop, peak - v);
    s.rebound = std::max(s.rebound, v - trough);
    peak = std::max(peak, v);
    trough = std::min(trough, v);
  }
  return s;
}

void training_regression(const fs::path& work, std::size_t threads) {
  const auto t0 = Clock::now();
  double giou_dr = 0.0, giou_raw = 0.0;
  std::size_t non_monotone = 0;
  std::ostringstream traces;
  bool ran = true;
  for (int seed = 0; seed < 5; ++seed) {
    for (const char* mode : {"distribution_ranked", "raw_sum"}) {
      const auto dir = work / "train" / (std::string(mode) + "_" + std::to_string(seed));
      const int code = invoke({"train", "--seed", std::to_string(seed), "--override",
                            std::string("reward_mode=") + mode, "--override", "steps=300",
                            "--threads", std::to_string(threads), "--output-dir", dir.string()});
      if (code != 0) {
        ran = false;
        continue;
      }
      const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
      const double g = summary.at("heldout_giou").get<double>();
      (std::string(mode) == "raw_sum" ? giou_raw : giou_dr) += g / 5.0;
      std::vector<double> entropy;
      std::istringstream log(slurp(dir / "episode_log.jsonl"));
      for (std::string line; std::getline(log, line);) {
        entropy.push_back(nlohmann::json::parse(line).at("mean_entropy").get<double>());
      }
      const auto shape = entropy_shape(entropy);
      const double range = *std::max_element(entropy.begin(), entropy.end()) -
                           *std::min_element(entropy.begin(), entropy.end());
      const bool nm = shape.drop > 0.05 * range && shape.rebound > 0.05 * range;
      if (std::string(mode) == "distribution_ranked") non_monotone += nm ? 1 : 0;
      traces << "  entropy " << mode << " seed=" << seed << " start=" << fmt(entropy.front())
             << " end=" << fmt(entropy.back()) << " max_drop=" << fmt(shape.drop)
             << " max_rebound=" << fmt(shape.rebound) << " non_monotone=" << (nm ? 1 : 0) << '\n';
    }
  }
  const double secs = seconds_since(t0);
  report(ran && giou_dr >= giou_raw && secs < 900.0, "training_regression",
         "heldout_giou distribution_ranked=" + fmt(giou_dr) + " raw_sum=" + fmt(giou_raw) +
             " entropy_non_monotone_runs=" + std::to_string(non_monotone) + "/5 seconds=" + fmt(secs));
  std::cout << traces.str();
}

void determinism(const fs::path& work) {
  const fs::path gt = work / "det_gt.jsonl";
  {
    std::ofstream f(gt);
    f << R"({"scene_id":"a","width":100,"height":100,"objects":[{"bbox_2d":[0,0,10,10],"point_2d":[5,5]}]})"
      << '\n'
      << R"({"scene_id":"b","width":100,"height":100,"objects":[{"bbox_2d":[20,20,40,40],"point_2d":[30,30]},{"bbox_2d":[50,50,60,70],"point_2d":[55,60]}]})"
      << '\n';
  }
  const fs::path pred = work / "det_pred.jsonl";
  {
    std::ofstream f(pred);
    f << R"({"scene_id":"a","objects":[{"bbox_2d":[1,0,10,12],"point_2d":[4,5]}]})" << '\n'
      << R"({"scene_id":"b","objects":[{"bbox_2d":[52,50,60,69],"point_2d":[56,61]}]})" << '\n';
  }
  const fs::path replay = work / "det_replay.jsonl";
  {
    std::ofstream f(replay);
    Rng rng(3);
    for (int s = 0; s < 20; ++s)
      for (int k = 0; k < 5; ++k)
        f << "{\"step\":" << s << ",\"x\":[" << rng.uniform() << ',' << rng.uniform() << ','
          << rng.uniform() << "]}\n";
  }
  struct Cmd {
    std::string name;
    std::vector<std::string> args;
  };
  const std::vector<Cmd> cmds = {
      {"train", {"train", "--override", "steps=40", "--override", "eval_scenes=50", "--override",
                 "task=mixed", "--seed", "5"}},
      {"bias-demo", {"bias-demo", "--override", "samples=200000", "--override",
                     "scenarios=sigma_10_to_1,equal_sigma,three_mixed"}},
      {"eval", {"eval", "--predictions", pred.string(), "--ground-truth", gt.string()}},
      {"quantile-snapshot-replay", {"quantile-snapshot", "--input", replay.string()}},
      {"quantile-snapshot-live", {"quantile-snapshot", "--override", "steps=10", "--seed", "2"}},
      {"parse-check", {"parse-check"}},
  };
  std::size_t files = 0;
  std::vector<std::string> mismatched;
  for (const auto& c : cmds) {
    std::vector<fs::path> dirs;
    for (const char* threads : {"1", "1", "4", "7"}) {
      dirs.push_back(work / "determinism" / (c.name + "_" + std::to_string(dirs.size())));
      auto args = c.args;
      args.insert(args.end(), {"--threads", threads, "--output-dir", dirs.back().string()});
      if (invoke(args) != 0) mismatched.push_back(c.name + "(exit)");
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      const auto name = entry.path().filename();
      const auto ref = slurp(entry.path());
      ++files;
      for (std::size_t k = 1; k < dirs.size(); ++k) {
        if (slurp(dirs[k] / name) != ref) {
          mismatched.push_back(c.name + "/" + name.string());
          break;
        }
      }
    }
  }
  std::string detail = "subcommands=" + std::to_string(cmds.size()) + " files=" + std::to_string(files) +
                       " threads=1,1,4,7 mismatches=" + std::to_string(mismatched.size());
  for (const auto& m : mismatched) detail += " " + m;
  report(mismatched.empty(), "determinism", detail);
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "rank_reward_acceptance";
  std::size_t threads = 1;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workdir" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--threads" && i + 1 < argc) {
      threads = std::stoul(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--workdir DIR] [--threads N]\n";
      return 2;
    }
  }
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::function<void()>> checks = {
      bias_mechanism,
      quantile_properties,
      advantage_suite,
      gradient_check,
      metric_oracles,
      [&] { format_corpus(work); },
      [&] { training_regression(work, threads); },
      [&] { determinism(work); },
  };
  for (const auto& check : checks) {
    try {
      check();
    } catch (const std::exception& e) {
      report(false, "exception", e.what());
    }
  }
  std::cout << (g_failures == 0 ? "ALL PASS" : std::to_string(g_failures) + " FAILED") << std::endl;
  return g_failures == 0 ? 0 : 1;
}
