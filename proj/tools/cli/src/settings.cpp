#include "rank_reward_cli/settings.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rank_reward/errors.hpp"

namespace rank_reward::cli {

namespace {

constexpr std::string_view kScenarioPrefix = "scenario.";
const std::vector<std::string> kScenarioKeys = {"mean", "sigma", "rho", "corr"};

bool is_scenario_section(const std::string& s) {
  return s.size() > kScenarioPrefix.size() && s.starts_with(kScenarioPrefix);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError(where + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& where) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_double(item, where));
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Settings::Settings() {
  const env::TrainRunConfig t;
  const auto d = [](double v) { return format_double(v); };
  const auto z = [](std::size_t v) { return std::to_string(v); };
  const auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>>
      schema = {
          {"run", {{"seed", "0"}}},
          {"train",
           {{"steps", z(t.steps)},
            {"batch_size", z(t.batch_size)},
            {"group_size", z(t.group_size)},
            {"learning_rate", d(t.learning_rate)},
            {"reward_mode", std::string(to_string(t.reward_mode))},
            {"look_format", b(t.look_format_enabled)},
            {"task", std::string(to_string(t.task))},
            {"init_scale", d(t.init_scale)},
            {"push_invalid", b(t.push_invalid)},
            {"eval_scenes", "200"}}},
          {"grpo",
           {{"clip_epsilon", d(t.grpo.clip_epsilon)},
            {"kl_beta", d(t.grpo.kl_beta)},
            {"adv_std_floor", d(t.grpo.adv_std_floor)}}},
          {"adam",
           {{"beta1", d(t.adam.beta1)},
            {"beta2", d(t.adam.beta2)},
            {"epsilon", d(t.adam.epsilon)},
            {"weight_decay", d(t.adam.weight_decay)}}},
          {"metrics", {{"tau_min", d(t.thresholds.tau_min)}, {"tau_max", d(t.thresholds.tau_max)}}},
          {"format",
           {{"ngram", z(t.format.ngram)},
            {"repetition_threshold", d(t.format.repetition_threshold)}}},
          {"quantile", {{"capacity", z(t.queue_capacity)}}},
          {"env",
           {{"width", d(t.scene.width)},
            {"height", d(t.scene.height)},
            {"min_side", d(t.scene.min_side)},
            {"max_side", d(t.scene.max_side)},
            {"max_objects", z(t.scene.max_objects)},
            {"max_slots", z(t.shape.max_slots)},
            {"miss_prob", d(t.evidence.miss_prob)},
            {"ghost_prob", d(t.evidence.ghost_prob)},
            {"jitter", d(t.evidence.jitter)}}},
          {"bias",
           {{"samples", "1000000"}, {"scenarios", "sigma_10_to_1"}, {"svg", "true"}}},
      };
  for (const auto& [section, entries] : schema) {
    std::vector<std::string> keys;
    for (const auto& [key, value] : entries) {
      keys.push_back(key);
      values_[section][key] = value;
    }
    order_.emplace_back(section, std::move(keys));
  }
  values_["scenario.sigma_10_to_1"] = {
      {"mean", "0, 0"}, {"sigma", "1, 0.1"}, {"rho", "0.5, 0.5"}, {"corr", ""}};
  values_["scenario.equal_sigma"] = {
      {"mean", "0, 0"}, {"sigma", "1, 1"}, {"rho", "0.5, 0.5"}, {"corr", ""}};
  values_["scenario.three_mixed"] = {
      {"mean", "0.5, 0.5, 0.5"}, {"sigma", "0.3, 0.1, 0.03"}, {"rho", "0.4, 0.4, 0.4"}, {"corr", ""}};
}

std::string Settings::resolve_section(const std::string& section, const std::string& key) const {
  if (is_scenario_section(section)) {
    if (std::find(kScenarioKeys.begin(), kScenarioKeys.end(), key) == kScenarioKeys.end()) {
      throw ConfigError("unknown key '" + key + "' in [" + section +
                        "] (allowed: mean, sigma, rho, corr)");
    }
    return section;
  }
  if (!section.empty()) {
    const auto it = values_.find(section);
    if (it == values_.end() || is_scenario_section(section)) {
      throw ConfigError("unknown config section [" + section + "]");
    }
    if (!it->second.contains(key)) {
      throw ConfigError("unknown config key '" + section + "." + key + "'");
    }
    return section;
  }
  std::vector<std::string> owners;
  for (const auto& [name, keys] : order_) {
    if (std::find(keys.begin(), keys.end(), key) != keys.end()) owners.push_back(name);
  }
  if (owners.empty()) throw ConfigError("unknown config key '" + key + "'");
  if (owners.size() > 1) {
    throw ConfigError("ambiguous config key '" + key + "'; qualify it with a section");
  }
  return owners.front();
}

void Settings::set(const std::string& section, const std::string& key, const std::string& value) {
  const auto owner = resolve_section(section, key);
  if (is_scenario_section(owner) && !values_.contains(owner)) {
    values_[owner] = {{"mean", ""}, {"sigma", ""}, {"rho", ""}, {"corr", ""}};
  }
  values_[owner][key] = trim(value);
}

const std::string& Settings::get(const std::string& section, const std::string& key) const {
  const auto it = values_.find(section);
  if (it == values_.end() || !it->second.contains(key)) {
    throw ConfigError("missing config key '" + section + "." + key + "'");
  }
  return it->second.at(key);
}

void Settings::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.message() +
                      " (line " + std::to_string(e.line()) + ")");
  }
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      set("", name, node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) set(name, key, leaf.data());
  }
}

void Settings::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like key=value");
  }
  const std::string lhs = trim(std::string_view(assignment).substr(0, eq));
  const std::string rhs = assignment.substr(eq + 1);
  const auto dot = lhs.rfind('.');
  if (dot == std::string::npos) {
    set("", lhs, rhs);
  } else {
    set(lhs.substr(0, dot), lhs.substr(dot + 1), rhs);
  }
}

double Settings::get_double(const std::string& section, const std::string& key) const {
  return parse_double(get(section, key), section + "." + key);
}

std::uint64_t Settings::get_u64(const std::string& section, const std::string& key) const {
  const auto& text = get(section, key);
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError(section + "." + key + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

std::size_t Settings::get_size(const std::string& section, const std::string& key) const {
  return static_cast<std::size_t>(get_u64(section, key));
}

bool Settings::get_bool(const std::string& section, const std::string& key) const {
  const auto& v = get(section, key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(section + "." + key + ": expected true or false, got '" + v + "'");
}

env::TrainRunConfig Settings::train_config() const {
  env::TrainRunConfig c;
  c.seed = seed();
  c.steps = get_size("train", "steps");
  c.batch_size = get_size("train", "batch_size");
  c.group_size = get_size("train", "group_size");
  c.learning_rate = get_double("train", "learning_rate");
  const auto& mode = get("train", "reward_mode");
  const auto parsed_mode = env::parse_reward_mode(mode);
  if (!parsed_mode) {
    throw ConfigError("train.reward_mode '" + mode + "' is not one of: " +
                      std::string(env::kRewardModeNames));
  }
  c.reward_mode = *parsed_mode;
  c.look_format_enabled = get_bool("train", "look_format");
  const auto& task = get("train", "task");
  const auto parsed_task = env::parse_task_mix(task);
  if (!parsed_task) {
    throw ConfigError("train.task '" + task + "' is not one of: single, multi, mixed");
  }
  c.task = *parsed_task;
  c.init_scale = get_double("train", "init_scale");
  c.push_invalid = get_bool("train", "push_invalid");
  c.grpo.clip_epsilon = get_double("grpo", "clip_epsilon");
  c.grpo.kl_beta = get_double("grpo", "kl_beta");
  c.grpo.adv_std_floor = get_double("grpo", "adv_std_floor");
  c.adam.beta1 = get_double("adam", "beta1");
  c.adam.beta2 = get_double("adam", "beta2");
  c.adam.epsilon = get_double("adam", "epsilon");
  c.adam.weight_decay = get_double("adam", "weight_decay");
  c.thresholds.tau_min = get_double("metrics", "tau_min");
  c.thresholds.tau_max = get_double("metrics", "tau_max");
  c.format.ngram = get_size("format", "ngram");
  c.format.repetition_threshold = get_double("format", "repetition_threshold");
  c.queue_capacity = get_size("quantile", "capacity");
  c.scene.width = get_double("env", "width");
  c.scene.height = get_double("env", "height");
  c.scene.min_side = get_double("env", "min_side");
  c.scene.max_side = get_double("env", "max_side");
  c.scene.max_objects = get_size("env", "max_objects");
  c.shape.max_slots = get_size("env", "max_slots");
  c.evidence.miss_prob = get_double("env", "miss_prob");
  c.evidence.ghost_prob = get_double("env", "ghost_prob");
  c.evidence.jitter = get_double("env", "jitter");
  c.validate();
  return c;
}

std::vector<lab::Scenario> Settings::scenarios() const {
  std::vector<lab::Scenario> out;
  for (const auto& name : split(get("bias", "scenarios"), ',')) {
    if (name.empty()) throw ConfigError("bias.scenarios contains an empty name");
    const std::string section = std::string(kScenarioPrefix) + name;
    if (!values_.contains(section)) {
      throw ConfigError("bias scenario '" + name + "' has no [" + section + "] section");
    }
    const auto means = parse_list(get(section, "mean"), section + ".mean");
    const auto sigmas = parse_list(get(section, "sigma"), section + ".sigma");
    const auto rhos = parse_list(get(section, "rho"), section + ".rho");
    if (means.size() != sigmas.size() || sigmas.size() != rhos.size()) {
      throw ConfigError(section + ": mean, sigma and rho need the same length");
    }
    lab::Scenario s;
    s.name = name;
    for (std::size_t j = 0; j < sigmas.size(); ++j) s.components.push_back({means[j], sigmas[j], rhos[j]});
    const auto& corr = get(section, "corr");
    if (!corr.empty()) {
      lab::CorrelationMatrix m;
      for (const auto& row : split(corr, ';')) m.push_back(parse_list(row, section + ".corr"));
      s.idiosyncratic_corr = std::move(m);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string Settings::resolved_ini() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [section, keys] : order_) {
    os << (first ? "" : "\n") << '[' << section << "]\n";
    first = false;
    for (const auto& key : keys) os << key << " = " << values_.at(section).at(key) << '\n';
  }
  std::vector<std::string> used = split(get("bias", "scenarios"), ',');
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  for (const auto& name : used) {
    const std::string section = std::string(kScenarioPrefix) + name;
    const auto it = values_.find(section);
    if (it == values_.end()) continue;
    os << "\n[" << section << "]\n";
    for (const auto& key : kScenarioKeys) os << key << " = " << it->second.at(key) << '\n';
  }
  return os.str();
}

}  // namespace rank_reward::cli
