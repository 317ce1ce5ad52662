#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rank_reward::lab {

/// One reward component: marginal N(mean, sigma^2) with target Pearson
/// correlation rho against the scalar score proxy S ~ N(0, 1).
struct ComponentSpec {
  double mean = 0.0;
  double sigma = 1.0;
  double rho = 0.0;
};

using CorrelationMatrix = std::vector<std::vector<double>>;

/// Column-major draws: rewards[j][n] is component j of sample n.
struct SampleMatrix {
  std::vector<std::vector<double>> rewards;
  std::vector<double> score;

  std::size_t components() const { return rewards.size(); }
  std::size_t size() const { return score.size(); }
};

/// Samples are generated in fixed blocks of this many rows, each from its own
/// sub-stream, so the draws never depend on the worker count.
inline constexpr std::size_t kGenerationBlock = 4096;

struct SimulationConfig {
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  /// Correlation among the components' idiosyncratic parts. Identity when
  /// absent. Must be symmetric positive semidefinite with a unit diagonal.
  std::optional<CorrelationMatrix> idiosyncratic_corr;
};

/// Gaussian one-factor copula:
///   S = Z_S,  r_j = mean_j + sigma_j (rho_j Z_S + sqrt(1 - rho_j^2) E_j).
/// Throws InfeasibleCorrelationError for |rho| > 1 or a correlation matrix
/// that is not PSD, ValueRangeError for negative or non-finite parameters
/// and for fewer than 2 samples.
SampleMatrix simulate_components(std::span<const ComponentSpec> specs,
                                 const SimulationConfig& cfg);

enum class Normalization { RawSum, QuantileRanked };

std::string_view to_string(Normalization n);

/// q_n = #{m : x_m <= x_n} / M over the sample itself.
std::vector<double> ecdf_transform(std::span<const double> values);

struct GradientReport {
  std::vector<double> cov;    // Cov(r_j, S) after normalization
  std::vector<double> share;  // |cov_j| / sum |cov|
  std::vector<double> sigma;  // empirical std of each normalized component
  std::vector<double> rho;    // empirical Pearson correlation with S
  /// Empirical std of the summed normalized reward.
  double sigma_mix = 0.0;
  std::size_t sample_count = 0;
};

/// Covariances are reduced over `chunk_size` row chunks in chunk order.
GradientReport gradient_contributions(const SampleMatrix& samples,
                                      Normalization normalization,
                                      std::size_t chunk_size = 65536,
                                      std::size_t threads = 1);

/// max share / max(min share, 1e-12); requires at least two components.
double dominance_ratio(const GradientReport& report);

struct Scenario {
  std::string name;
  std::vector<ComponentSpec> components;
  std::optional<CorrelationMatrix> idiosyncratic_corr;
};

/// Two components, rho = 0.5 each, sigma 1.0 and 0.1.
Scenario default_scenario();

struct ScenarioResult {
  Scenario scenario;
  GradientReport raw_sum;
  GradientReport quantile_ranked;
};

/// Scenario `index` draws from derive_seed(seed, "lab", index).
ScenarioResult run_scenario(const Scenario& scenario, std::size_t index,
                            std::size_t samples, std::uint64_t seed,
                            std::size_t threads = 1);

/// Header: scenario,normalization,component,sigma,rho,cov_estimate,share,dominance_ratio
/// sigma and rho are the configured values; one row per component and mode.
std::string report_csv(std::span<const ScenarioResult> results);

/// Grouped bar chart of the shares per scenario and mode.
std::string shares_svg(std::span<const ScenarioResult> results);

}  // namespace rank_reward::lab
