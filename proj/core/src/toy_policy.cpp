#include "rank_reward/toy_policy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rank_reward/errors.hpp"

namespace rank_reward::env {
namespace {

constexpr std::array<std::string_view, 8> kLookPhrases = {
    "red cup",      "round shape",  "metal texture", "left corner",
    "bright region", "sharp edge",  "wooden surface", "small object",
};

constexpr std::array<Head, 6> kGeometryHeads = {
    Head::CenterX, Head::CenterY, Head::Width, Head::Height, Head::PointX, Head::PointY,
};

constexpr std::uint16_t kEmit = 0;
constexpr std::uint16_t kStop = 1;

void softmax_inplace(std::vector<double>& v) {
  const double hi = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - hi);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

std::string format_int(double v) {
  return std::to_string(static_cast<long long>(std::llround(v)));
}

}  // namespace

std::string_view head_name(Head h) {
  switch (h) {
    case Head::Stop: return "stop";
    case Head::Look: return "look";
    case Head::CenterX: return "center_x";
    case Head::CenterY: return "center_y";
    case Head::Width: return "width";
    case Head::Height: return "height";
    case Head::PointX: return "point_x";
    case Head::PointY: return "point_y";
  }
  return "unknown";
}

std::size_t PolicyShape::vocab(Head h) const {
  switch (h) {
    case Head::Stop: return 2;
    case Head::Look: return kLookPhrases.size();
    case Head::CenterX:
    case Head::CenterY:
    case Head::PointX:
    case Head::PointY: return coord_bins;
    case Head::Width:
    case Head::Height: return size_bins;
  }
  return 0;
}

std::size_t PolicyShape::feature_dim() const {
  // bias, presence, cx one-hot, cy one-hot, w class, h class, slot one-hot
  return 2 + 2 * coarse_cells + 2 * size_classes + max_slots;
}

std::size_t PolicyShape::max_vocab() const {
  std::size_t v = 0;
  for (std::size_t h = 0; h < kHeadCount; ++h) {
    const auto head = static_cast<Head>(h);
    if (head == Head::Look && !look_enabled) continue;
    v = std::max(v, vocab(head));
  }
  return v;
}

void PolicyShape::validate() const {
  if (max_slots == 0 || max_slots > 255) throw ConfigError("max_slots must be in [1, 255]");
  if (coord_bins < 2) throw ConfigError("coord_bins must be >= 2");
  if (size_bins < 1) throw ConfigError("size_bins must be >= 1");
  if (!(bin_width > 0.0)) throw ConfigError("bin_width must be > 0");
  if (coarse_cells < 1 || size_classes < 1) {
    throw ConfigError("evidence grid must have >= 1 cell and size class");
  }
  if (feature_dim() > std::numeric_limits<std::uint16_t>::max()) {
    throw ConfigError("feature dimension too large");
  }
}

std::span<const std::string_view> look_phrases() { return kLookPhrases; }

std::vector<DecodedObject> decode_objects(const TokenSequence& tokens,
                                          const PolicyShape& shape) {
  std::vector<DecodedObject> objects;
  const double extent = shape.frame_extent();
  std::array<double, kHeadCount> value{};
  DecodedObject current;
  bool open = false;
  const auto close_object = [&] {
    if (!open) return;
    const double cx = value[static_cast<std::size_t>(Head::CenterX)] * shape.bin_width;
    const double cy = value[static_cast<std::size_t>(Head::CenterY)] * shape.bin_width;
    const double w = (value[static_cast<std::size_t>(Head::Width)] + 1.0) * shape.bin_width;
    const double h = (value[static_cast<std::size_t>(Head::Height)] + 1.0) * shape.bin_width;
    auto& b = current.prediction.bbox;
    b.x1 = std::clamp(cx - w / 2.0, 0.0, extent);
    b.x2 = std::clamp(cx + w / 2.0, 0.0, extent);
    b.y1 = std::clamp(cy - h / 2.0, 0.0, extent);
    b.y2 = std::clamp(cy + h / 2.0, 0.0, extent);
    current.prediction.point = {
        value[static_cast<std::size_t>(Head::PointX)] * shape.bin_width,
        value[static_cast<std::size_t>(Head::PointY)] * shape.bin_width};
    objects.push_back(current);
    current = {};
    value.fill(0.0);
    open = false;
  };
  for (const Token& t : tokens) {
    if (t.head == Head::Stop) {
      close_object();
      open = t.choice == kEmit;
      continue;
    }
    if (t.head == Head::Look) current.phrase = t.choice;
    value[static_cast<std::size_t>(t.head)] = t.choice;
  }
  close_object();
  return objects;
}

std::string render_tokens(const TokenSequence& tokens, const PolicyShape& shape) {
  const auto objects = decode_objects(tokens, shape);
  std::string think = "I scan the scene for target objects.";
  std::string answer = "[";
  if (objects.empty()) think += " none found.";
  for (std::size_t k = 0; k < objects.size(); ++k) {
    const auto& o = objects[k];
    const auto& b = o.prediction.bbox;
    const auto& p = o.prediction.point;
    think += " object " + std::to_string(k + 1) + ":";
    if (shape.look_enabled) {
      think += " <look>";
      think += kLookPhrases[o.phrase % kLookPhrases.size()];
      think += "</look>";
    }
    think += " near " + format_int((b.x1 + b.x2) / 2.0) + " " +
             format_int((b.y1 + b.y2) / 2.0) + " size " + format_int(b.width()) +
             " " + format_int(b.height()) + " point " + format_int(p.x) + " " +
             format_int(p.y) + ".";
    if (k > 0) answer += ",";
    answer += "{\"bbox_2d\":[" + format_int(b.x1) + "," + format_int(b.y1) + "," +
              format_int(b.x2) + "," + format_int(b.y2) + "],\"point_2d\":[" +
              format_int(p.x) + "," + format_int(p.y) + "]}";
  }
  answer += "]";
  return "<think>" + think + "</think>\n<answer>" + answer + "</answer>";
}

ToyPolicy::ToyPolicy(PolicyShape shape, std::uint64_t init_seed, double init_scale)
    : shape_(shape) {
  shape_.validate();
  const std::size_t cols = shape_.feature_dim();
  std::size_t offset = 0;
  for (std::size_t h = 0; h < kHeadCount; ++h) {
    const auto head = static_cast<Head>(h);
    ParameterBlock block{std::string(head_name(head)), shape_.vocab(head), cols, offset};
    offset += block.rows * block.cols;
    blocks_.push_back(std::move(block));
  }
  current_.assign(offset, 0.0);
  if (init_scale > 0.0) {
    Rng rng(init_seed);
    for (double& v : current_) v = init_scale * rng.normal();
  }
  old_ = current_;
  reference_ = current_;
}

void ToyPolicy::check_observation(const Observation& obs) const {
  if (obs.slot_features.size() != shape_.max_slots) {
    throw DimensionError("observation slot count does not match policy");
  }
}

void ToyPolicy::logits(std::span<const double> params, const Observation& obs,
                       Head head, std::size_t slot, std::vector<double>& out) const {
  const auto& block = blocks_[static_cast<std::size_t>(head)];
  const auto& active = obs.slot_features[slot];
  out.assign(block.rows, 0.0);
  for (std::size_t v = 0; v < block.rows; ++v) {
    const double* row = params.data() + block.offset + v * block.cols;
    double z = 0.0;
    for (const auto d : active) z += row[d];
    out[v] = z;
  }
}

std::vector<double> ToyPolicy::head_distribution(std::span<const double> params,
                                                 const Observation& obs, Head head,
                                                 std::size_t slot) const {
  std::vector<double> p;
  logits(params, obs, head, slot, p);
  softmax_inplace(p);
  return p;
}

template <class Choose>
TokenSequence ToyPolicy::decode(std::span<const double> params,
                                const Observation& obs, Choose choose) const {
  check_observation(obs);
  TokenSequence tokens;
  std::vector<double> probs;
  const auto emit = [&](Head head, std::size_t slot) {
    probs = head_distribution(params, obs, head, slot);
    const auto choice = static_cast<std::uint16_t>(choose(probs));
    tokens.push_back({head, static_cast<std::uint8_t>(slot), choice});
    return choice;
  };
  for (std::size_t k = 0; k < shape_.max_slots; ++k) {
    if (emit(Head::Stop, k) == kStop) break;
    if (shape_.look_enabled) emit(Head::Look, k);
    for (Head h : kGeometryHeads) emit(h, k);
  }
  return tokens;
}

TokenSequence ToyPolicy::sample(std::span<const double> params,
                                const Observation& obs, Rng& rng) const {
  return decode(params, obs, [&](const std::vector<double>& p) {
    return rng.categorical(p);
  });
}

TokenSequence ToyPolicy::greedy(std::span<const double> params,
                                const Observation& obs) const {
  return decode(params, obs, [](const std::vector<double>& p) {
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  });
}

std::vector<double> ToyPolicy::token_logprobs(std::span<const double> params,
                                              const Observation& obs,
                                              const TokenSequence& tokens) const {
  check_observation(obs);
  std::vector<double> out;
  out.reserve(tokens.size());
  std::vector<double> z;
  for (const Token& t : tokens) {
    logits(params, obs, t.head, t.slot, z);
    const double hi = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - hi);
    out.push_back(z[t.choice] - hi - std::log(sum));
  }
  return out;
}

std::vector<std::vector<double>> ToyPolicy::token_distributions(
    std::span<const double> params, const Observation& obs,
    const TokenSequence& tokens) const {
  check_observation(obs);
  std::vector<std::vector<double>> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) {
    out.push_back(head_distribution(params, obs, t.head, t.slot));
  }
  return out;
}

void ToyPolicy::accumulate_gradient(std::span<const double> params,
                                    const Observation& obs,
                                    const TokenSequence& tokens,
                                    std::span<const double> weights,
                                    std::span<double> grad) const {
  check_observation(obs);
  if (weights.size() != tokens.size() || grad.size() != current_.size()) {
    throw LengthMismatchError("accumulate_gradient: size mismatch");
  }
  std::vector<double> p;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const double w = weights[t];
    if (w == 0.0) continue;
    const Token& tok = tokens[t];
    p = head_distribution(params, obs, tok.head, tok.slot);
    const auto& block = blocks_[static_cast<std::size_t>(tok.head)];
    const auto& active = obs.slot_features[tok.slot];
    // d log softmax(z)[a] / d z_v = 1[v == a] - p_v; z_v is linear in the
    // active features.
    for (std::size_t v = 0; v < block.rows; ++v) {
      const double coeff = w * ((v == tok.choice ? 1.0 : 0.0) - p[v]);
      double* row = grad.data() + block.offset + v * block.cols;
      for (const auto d : active) row[d] += coeff;
    }
  }
}

std::string policy_to_json(const ToyPolicy& policy) {
  const auto& s = policy.shape();
  nlohmann::ordered_json doc;
  doc["format"] = "rank_reward_lab.policy";
  doc["version"] = 1;
  doc["shape"] = {{"max_slots", s.max_slots},     {"coord_bins", s.coord_bins},
                  {"bin_width", s.bin_width},     {"size_bins", s.size_bins},
                  {"look_enabled", s.look_enabled}, {"coarse_cells", s.coarse_cells},
                  {"size_classes", s.size_classes}};
  auto blocks = nlohmann::ordered_json::array();
  for (const auto& b : policy.blocks()) {
    const auto first = policy.current().begin() + static_cast<std::ptrdiff_t>(b.offset);
    std::vector<double> values(first, first + static_cast<std::ptrdiff_t>(b.rows * b.cols));
    blocks.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}, {"values", values}});
  }
  doc["blocks"] = std::move(blocks);
  return doc.dump();
}

ToyPolicy policy_from_json(std::string_view text) {
  const auto doc = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw FormatError("policy file is not JSON");
  if (doc.value("format", std::string{}) != "rank_reward_lab.policy") {
    throw FormatError("policy file has wrong format header");
  }
  if (doc.value("version", 0) != 1) throw FormatError("unsupported policy file version");
  try {
    const auto& js = doc.at("shape");
    PolicyShape shape;
    shape.max_slots = js.at("max_slots").get<std::size_t>();
    shape.coord_bins = js.at("coord_bins").get<std::size_t>();
    shape.bin_width = js.at("bin_width").get<double>();
    shape.size_bins = js.at("size_bins").get<std::size_t>();
    shape.look_enabled = js.at("look_enabled").get<bool>();
    shape.coarse_cells = js.at("coarse_cells").get<std::size_t>();
    shape.size_classes = js.at("size_classes").get<std::size_t>();
    ToyPolicy policy(shape, 0, 0.0);
    const auto& blocks = doc.at("blocks");
    if (blocks.size() != policy.blocks().size()) throw FormatError("policy block count mismatch");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& expected = policy.blocks()[i];
      const auto& b = blocks[i];
      if (b.at("name").get<std::string>() != expected.name ||
          b.at("rows").get<std::size_t>() != expected.rows ||
          b.at("cols").get<std::size_t>() != expected.cols) {
        throw FormatError("policy block '" + expected.name + "' has wrong layout");
      }
      const auto values = b.at("values").get<std::vector<double>>();
      if (values.size() != expected.rows * expected.cols) {
        throw FormatError("policy block '" + expected.name + "' has wrong size");
      }
      std::copy(values.begin(), values.end(),
                policy.current().begin() + static_cast<std::ptrdiff_t>(expected.offset));
    }
    policy.snapshot_old();
    policy.reference_mutable() = policy.current();
    return policy;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("policy file: ") + e.what());
  }
}

}  // namespace rank_reward::env
