#include "rank_reward/bias_lab.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rank_reward/errors.hpp"
#include "rank_reward/parallel.hpp"
#include "rank_reward/random.hpp"

namespace rank_reward::lab {

namespace {

// Lower-triangular L with L L^T = c. Zero pivots are allowed so singular
// PSD matrices pass; a negative pivot means c is not PSD.
std::vector<std::vector<double>> cholesky_psd(const CorrelationMatrix& c, std::size_t n) {
  constexpr double kTol = 1e-10;
  if (c.size() != n) {
    throw InfeasibleCorrelationError("correlation matrix must be " + std::to_string(n) +
                                     "x" + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (c[i].size() != n) {
      throw InfeasibleCorrelationError("correlation matrix row " + std::to_string(i) +
                                       " has the wrong length");
    }
    if (std::abs(c[i][i] - 1.0) > kTol) {
      throw InfeasibleCorrelationError("correlation matrix diagonal must be 1");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(c[i][j]) || std::abs(c[i][j] - c[j][i]) > kTol ||
          std::abs(c[i][j]) > 1.0 + kTol) {
        throw InfeasibleCorrelationError("correlation matrix must be symmetric with entries in [-1, 1]");
      }
    }
  }
  std::vector<std::vector<double>> l(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    double d = c[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= l[j][k] * l[j][k];
    if (d < -kTol) {
      throw InfeasibleCorrelationError("correlation matrix is not positive semidefinite");
    }
    const double pivot = d > kTol ? std::sqrt(d) : 0.0;
    l[j][j] = pivot;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = c[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      if (pivot == 0.0) {
        if (std::abs(s) > 1e-8) {
          throw InfeasibleCorrelationError("correlation matrix is not positive semidefinite");
        }
        l[i][j] = 0.0;
      } else {
        l[i][j] = s / pivot;
      }
    }
  }
  return l;
}

std::vector<std::pair<std::size_t, std::size_t>> chunks(std::size_t n, std::size_t size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t lo = 0; lo < n; lo += size) out.emplace_back(lo, std::min(n, lo + size));
  return out;
}

}  // namespace

SampleMatrix simulate_components(std::span<const ComponentSpec> specs,
                                 const SimulationConfig& cfg) {
  const std::size_t n = specs.size();
  if (n == 0) throw ValueRangeError("at least one component is required");
  if (cfg.samples < 2) throw ValueRangeError("samples must be >= 2");
  for (std::size_t j = 0; j < n; ++j) {
    const auto& s = specs[j];
    if (!std::isfinite(s.mean) || !std::isfinite(s.sigma) || s.sigma < 0.0) {
      throw ValueRangeError("component " + std::to_string(j) +
                            ": mean must be finite and sigma finite and >= 0");
    }
    if (!(std::abs(s.rho) <= 1.0)) {
      throw InfeasibleCorrelationError("component " + std::to_string(j) +
                                       ": rho must lie in [-1, 1]");
    }
  }
  std::vector<std::vector<double>> chol;
  if (cfg.idiosyncratic_corr) chol = cholesky_psd(*cfg.idiosyncratic_corr, n);

  SampleMatrix out;
  out.rewards.assign(n, std::vector<double>(cfg.samples));
  out.score.resize(cfg.samples);
  const auto blocks = chunks(cfg.samples, kGenerationBlock);
  parallel_for(blocks.size(), cfg.threads, [&](std::size_t b) {
    Rng rng(derive_seed(cfg.seed, "block", b));
    std::vector<double> e(n);
    std::vector<double> mixed(n);
    for (std::size_t row = blocks[b].first; row < blocks[b].second; ++row) {
      const double zs = rng.normal();
      for (auto& v : e) v = rng.normal();
      if (chol.empty()) {
        mixed = e;
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::size_t k = 0; k <= i; ++k) acc += chol[i][k] * e[k];
          mixed[i] = acc;
        }
      }
      out.score[row] = zs;
      for (std::size_t j = 0; j < n; ++j) {
        const auto& s = specs[j];
        const double z = s.rho * zs + std::sqrt(1.0 - s.rho * s.rho) * mixed[j];
        out.rewards[j][row] = s.mean + s.sigma * z;
      }
    }
  });
  return out;
}

std::string_view to_string(Normalization n) {
  return n == Normalization::RawSum ? "raw_sum" : "quantile_ranked";
}

std::vector<double> ecdf_transform(std::span<const double> values) {
  const std::size_t m = values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> q(m);
  std::size_t i = 0;
  while (i < m) {
    std::size_t end = i + 1;
    while (end < m && values[order[end]] == values[order[i]]) ++end;
    const double rank = static_cast<double>(end) / static_cast<double>(m);
    for (std::size_t k = i; k < end; ++k) q[order[k]] = rank;
    i = end;
  }
  return q;
}

GradientReport gradient_contributions(const SampleMatrix& samples,
                                      Normalization normalization,
                                      std::size_t chunk_size, std::size_t threads) {
  const std::size_t n = samples.components();
  const std::size_t m = samples.size();
  if (n == 0 || m < 2) throw ValueRangeError("need at least one component and two samples");
  if (chunk_size == 0) throw ValueRangeError("chunk_size must be >= 1");
  for (const auto& col : samples.rewards) {
    if (col.size() != m) throw LengthMismatchError("reward column length differs from score length");
  }

  std::vector<std::vector<double>> transformed;
  const std::vector<std::vector<double>>* cols = &samples.rewards;
  if (normalization == Normalization::QuantileRanked) {
    transformed.resize(n);
    parallel_for(n, threads, [&](std::size_t j) { transformed[j] = ecdf_transform(samples.rewards[j]); });
    cols = &transformed;
  }
  const auto& r = *cols;
  const auto& s = samples.score;
  const auto parts = chunks(m, chunk_size);

  // Columns 0..n-1 are components, n is the summed reward, n+1 is S.
  const std::size_t width = n + 2;
  auto value = [&](std::size_t c, std::size_t row) {
    if (c < n) return r[c][row];
    if (c == n) {
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += r[j][row];
      return total;
    }
    return s[row];
  };

  std::vector<std::vector<double>> sums(parts.size(), std::vector<double>(width, 0.0));
  parallel_for(parts.size(), threads, [&](std::size_t p) {
    for (std::size_t row = parts[p].first; row < parts[p].second; ++row) {
      for (std::size_t c = 0; c < width; ++c) sums[p][c] += value(c, row);
    }
  });
  std::vector<double> mean(width, 0.0);
  for (const auto& part : sums) {
    for (std::size_t c = 0; c < width; ++c) mean[c] += part[c];
  }
  for (auto& v : mean) v /= static_cast<double>(m);

  // Per chunk: centered squares for every column and cross terms with S.
  std::vector<std::vector<double>> moments(parts.size(), std::vector<double>(2 * width, 0.0));
  parallel_for(parts.size(), threads, [&](std::size_t p) {
    auto& acc = moments[p];
    for (std::size_t row = parts[p].first; row < parts[p].second; ++row) {
      const double ds = s[row] - mean[n + 1];
      for (std::size_t c = 0; c < width; ++c) {
        const double d = value(c, row) - mean[c];
        acc[c] += d * d;
        acc[width + c] += d * ds;
      }
    }
  });
  std::vector<double> total(2 * width, 0.0);
  for (const auto& part : moments) {
    for (std::size_t c = 0; c < 2 * width; ++c) total[c] += part[c];
  }

  const double denom = static_cast<double>(m - 1);
  GradientReport report;
  report.sample_count = m;
  const double var_s = total[n + 1] / denom;
  double abs_sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double var = total[j] / denom;
    const double cov = total[width + j] / denom;
    report.cov.push_back(cov);
    report.sigma.push_back(std::sqrt(var));
    report.rho.push_back(var > 0.0 && var_s > 0.0 ? cov / std::sqrt(var * var_s) : 0.0);
    abs_sum += std::abs(cov);
  }
  for (std::size_t j = 0; j < n; ++j) {
    report.share.push_back(abs_sum > 0.0 ? std::abs(report.cov[j]) / abs_sum
                                         : 1.0 / static_cast<double>(n));
  }
  report.sigma_mix = std::sqrt(total[n] / denom);
  return report;
}

double dominance_ratio(const GradientReport& report) {
  if (report.share.size() < 2) throw ValueRangeError("dominance ratio needs >= 2 components");
  const auto [lo, hi] = std::minmax_element(report.share.begin(), report.share.end());
  return *hi / std::max(*lo, 1e-12);
}

Scenario default_scenario() {
  return {"sigma_10_to_1", {{0.0, 1.0, 0.5}, {0.0, 0.1, 0.5}}, std::nullopt};
}

ScenarioResult run_scenario(const Scenario& scenario, std::size_t index,
                            std::size_t samples, std::uint64_t seed, std::size_t threads) {
  SimulationConfig cfg;
  cfg.samples = samples;
  cfg.seed = derive_seed(seed, "lab", index);
  cfg.threads = threads;
  cfg.idiosyncratic_corr = scenario.idiosyncratic_corr;
  const auto draws = simulate_components(scenario.components, cfg);
  return {scenario,
          gradient_contributions(draws, Normalization::RawSum, 65536, threads),
          gradient_contributions(draws, Normalization::QuantileRanked, 65536, threads)};
}

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string report_csv(std::span<const ScenarioResult> results) {
  std::ostringstream os;
  os << "scenario,normalization,component,sigma,rho,cov_estimate,share,dominance_ratio\n";
  for (const auto& res : results) {
    for (const auto* rep : {&res.raw_sum, &res.quantile_ranked}) {
      const auto mode = rep == &res.raw_sum ? Normalization::RawSum : Normalization::QuantileRanked;
      const double dom = rep->share.size() >= 2 ? dominance_ratio(*rep) : 1.0;
      for (std::size_t j = 0; j < rep->cov.size(); ++j) {
        const auto& spec = res.scenario.components[j];
        os << res.scenario.name << ',' << to_string(mode) << ',' << j << ','
           << fmt(spec.sigma) << ',' << fmt(spec.rho) << ',' << fmt(rep->cov[j]) << ','
           << fmt(rep->share[j]) << ',' << fmt(dom) << '\n';
      }
    }
  }
  return os.str();
}

std::string shares_svg(std::span<const ScenarioResult> results) {
  constexpr double kBar = 18.0;
  constexpr double kGap = 30.0;
  constexpr double kPlotHeight = 200.0;
  constexpr double kTop = 30.0;
  std::size_t bars = 0;
  for (const auto& r : results) bars += 2 * r.scenario.components.size();
  const double width = 60.0 + static_cast<double>(bars) * kBar +
                       static_cast<double>(2 * results.size()) * kGap;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << kTop + kPlotHeight + 60 << "\">\n";
  os << "<text x=\"10\" y=\"20\" font-size=\"14\">gradient contribution share</text>\n";
  double x = 40.0;
  const char* colors[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948"};
  for (const auto& res : results) {
    for (const auto* rep : {&res.raw_sum, &res.quantile_ranked}) {
      const double x0 = x;
      for (std::size_t j = 0; j < rep->share.size(); ++j) {
        const double h = rep->share[j] * kPlotHeight;
        os << "<rect x=\"" << x << "\" y=\"" << kTop + kPlotHeight - h << "\" width=\""
           << kBar - 2 << "\" height=\"" << h << "\" fill=\"" << colors[j % 6] << "\"/>\n";
        x += kBar;
      }
      const auto mode = rep == &res.raw_sum ? "raw_sum" : "quantile_ranked";
      os << "<text x=\"" << x0 << "\" y=\"" << kTop + kPlotHeight + 16
         << "\" font-size=\"10\">" << mode << "</text>\n";
      os << "<text x=\"" << x0 << "\" y=\"" << kTop + kPlotHeight + 30
         << "\" font-size=\"10\">" << res.scenario.name << "</text>\n";
      x += kGap;
    }
  }
  os << "<line x1=\"35\" y1=\"" << kTop + kPlotHeight << "\" x2=\"" << x << "\" y2=\""
     << kTop + kPlotHeight << "\" stroke=\"black\"/>\n</svg>\n";
  return os.str();
}

}  // namespace rank_reward::lab
