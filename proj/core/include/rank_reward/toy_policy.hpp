#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rank_reward/geometry.hpp"
#include "rank_reward/random.hpp"

namespace rank_reward::env {

/// Categorical heads of the toy policy. Heads are shared across slots; each
/// slot conditions them on its own evidence features.
enum class Head : std::uint8_t {
  Stop = 0,  // 0 = emit an object in this slot, 1 = stop
  Look,
  CenterX,
  CenterY,
  Width,
  Height,
  PointX,
  PointY,
};
inline constexpr std::size_t kHeadCount = 8;

std::string_view head_name(Head h);

struct PolicyShape {
  std::size_t max_slots = 6;
  /// Coordinate bins of `bin_width` pixels, including both frame edges.
  std::size_t coord_bins = 21;
  double bin_width = 50.0;
  /// Box side bins: side = (choice + 1) * bin_width.
  std::size_t size_bins = 10;
  bool look_enabled = true;
  /// Coarse evidence grid per axis and evidence size classes.
  std::size_t coarse_cells = 10;
  std::size_t size_classes = 5;

  std::size_t vocab(Head h) const;
  std::size_t feature_dim() const;
  /// Largest per-step vocabulary; token entropy is bounded by its log.
  std::size_t max_vocab() const;
  double frame_extent() const {
    return static_cast<double>(coord_bins - 1) * bin_width;
  }
  /// Throws ConfigError on zero-sized heads or too many slots.
  void validate() const;

  friend bool operator==(const PolicyShape&, const PolicyShape&) = default;
};

struct Token {
  Head head = Head::Stop;
  std::uint8_t slot = 0;
  std::uint16_t choice = 0;

  friend bool operator==(const Token&, const Token&) = default;
};
using TokenSequence = std::vector<Token>;

/// Binary evidence features per slot, stored as the indices of active
/// features (every feature is 0 or 1).
struct Observation {
  std::vector<std::vector<std::uint16_t>> slot_features;
};

/// Fixed look-phrase vocabulary rendered inside look tags.
std::span<const std::string_view> look_phrases();

struct DecodedObject {
  std::size_t phrase = 0;
  ObjectPrediction prediction;
};

std::vector<DecodedObject> decode_objects(const TokenSequence& tokens,
                                          const PolicyShape& shape);

/// Renders a token sequence as a full think/answer response. Every valid
/// token sequence renders to text with r_think = r_ans = 1.
std::string render_tokens(const TokenSequence& tokens, const PolicyShape& shape);

/// Named parameter block layout: block h is a vocab(h) x feature_dim()
/// row-major matrix of logit weights.
struct ParameterBlock {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
};

/// Factorized softmax policy with current, old and reference parameter
/// snapshots (theta, theta_old, theta_ref).
class ToyPolicy {
 public:
  /// Parameters start as N(0, init_scale^2) draws from `init_seed`
  /// (all zeros for init_scale = 0); old and reference copy them.
  ToyPolicy(PolicyShape shape, std::uint64_t init_seed, double init_scale = 0.0);

  const PolicyShape& shape() const { return shape_; }
  const std::vector<ParameterBlock>& blocks() const { return blocks_; }
  std::size_t parameter_count() const { return current_.size(); }

  std::vector<double>& current() { return current_; }
  const std::vector<double>& current() const { return current_; }
  const std::vector<double>& old() const { return old_; }
  const std::vector<double>& reference() const { return reference_; }
  std::vector<double>& old_mutable() { return old_; }
  std::vector<double>& reference_mutable() { return reference_; }

  /// theta_old <- theta.
  void snapshot_old() { old_ = current_; }

  /// Ancestral sampling of one response under `params`.
  TokenSequence sample(std::span<const double> params, const Observation& obs,
                       Rng& rng) const;
  /// Mode decoding (lowest index on ties).
  TokenSequence greedy(std::span<const double> params, const Observation& obs) const;

  std::vector<double> token_logprobs(std::span<const double> params,
                                     const Observation& obs,
                                     const TokenSequence& tokens) const;
  /// Full categorical distribution at every token position.
  std::vector<std::vector<double>> token_distributions(
      std::span<const double> params, const Observation& obs,
      const TokenSequence& tokens) const;

  /// grad += sum_t weights[t] * d logp(token_t) / d params.
  void accumulate_gradient(std::span<const double> params, const Observation& obs,
                           const TokenSequence& tokens,
                           std::span<const double> weights,
                           std::span<double> grad) const;

  /// Probabilities of one head at one slot.
  std::vector<double> head_distribution(std::span<const double> params,
                                        const Observation& obs, Head head,
                                        std::size_t slot) const;

 private:
  void logits(std::span<const double> params, const Observation& obs, Head head,
              std::size_t slot, std::vector<double>& out) const;
  void check_observation(const Observation& obs) const;
  template <class Choose>
  TokenSequence decode(std::span<const double> params, const Observation& obs,
                       Choose choose) const;

  PolicyShape shape_;
  std::vector<ParameterBlock> blocks_;
  std::vector<double> current_;
  std::vector<double> old_;
  std::vector<double> reference_;
};

/// {"format": "rank_reward_lab.policy", "version": 1, "shape": {...},
///  "blocks": [{"name", "rows", "cols", "values": [...]}]} for theta.
std::string policy_to_json(const ToyPolicy& policy);
/// Throws FormatError on a wrong header, version or block layout.
ToyPolicy policy_from_json(std::string_view text);

}  // namespace rank_reward::env
