#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rank_reward/bias_lab.hpp"
#include "rank_reward/training.hpp"

namespace rank_reward::cli {

/// Sectioned key/value configuration with a fixed schema. Every known key is
/// always present (defaults filled in) so the resolved file is complete.
/// Sections named "scenario.<name>" hold bias-lab scenarios and accept only
/// the scenario keys.
class Settings {
 public:
  Settings();

  /// Merges an INI file. Throws ConfigError on a missing file, a syntax
  /// error or an unknown key.
  void load_file(const std::filesystem::path& path);

  /// "key=value" or "section.key=value". A bare key must be unambiguous.
  void apply_override(const std::string& assignment);

  void set(const std::string& section, const std::string& key, const std::string& value);
  const std::string& get(const std::string& section, const std::string& key) const;

  double get_double(const std::string& section, const std::string& key) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key) const;
  std::size_t get_size(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;

  /// Deterministic INI text: schema order, then scenario sections by name.
  std::string resolved_ini() const;

  env::TrainRunConfig train_config() const;
  std::vector<lab::Scenario> scenarios() const;
  std::size_t eval_scene_count() const { return get_size("train", "eval_scenes"); }
  std::uint64_t seed() const { return get_u64("run", "seed"); }

 private:
  std::string resolve_section(const std::string& section, const std::string& key) const;

  std::vector<std::pair<std::string, std::vector<std::string>>> order_;
  std::map<std::string, std::map<std::string, std::string>> values_;
};

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace rank_reward::cli
