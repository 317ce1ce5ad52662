#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rank_reward/geometry.hpp"

namespace rank_reward::grammar {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kLookOpen = "<look>";
inline constexpr std::string_view kLookClose = "</look>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

/// Tag structure recovered from a candidate response.
///
/// `look_spans` is empty whenever `think_trace` is absent, and every span is
/// a substring of `think_trace`. `trailing_garbage` is set when any
/// non-whitespace text lies outside the recognized think and answer blocks,
/// or when the answer block precedes the think block.
struct ParsedResponse {
  std::optional<std::string> think_trace;
  std::vector<std::string> look_spans;
  std::optional<std::string> answer_text;
  bool trailing_garbage = false;

  friend bool operator==(const ParsedResponse&, const ParsedResponse&) = default;
};

/// The four structural checks and their sum. Each component is 0.0 or 1.0.
struct FormatScore {
  double r_look = 0.0;
  double r_think = 0.0;
  double r_ans = 0.0;
  double r_nr = 0.0;
  double total = 0.0;

  friend bool operator==(const FormatScore&, const FormatScore&) = default;
};

struct FormatConfig {
  /// When false, r_look is never awarded (look tags are not part of the task).
  bool score_look = true;
  std::size_t ngram = 5;
  /// A trace is repetitive when its duplicated n-gram fraction reaches this.
  double repetition_threshold = 0.3;
};

struct SchemaViolation {
  std::string reason;
};

using AnswerValidation = std::variant<AnswerPayload, SchemaViolation>;

/// Never throws. The first open tag of each kind is paired with the first
/// matching close tag after it; a nested open tag or a missing close tag
/// leaves the field absent.
ParsedResponse parse_response(std::string_view text);

/// Inverse of parse_response for well-formed responses (think block, then
/// answer block, no garbage).
std::string render_response(const ParsedResponse& parsed);

/// Accepts exactly a JSON array of objects with keys "bbox_2d" (4 finite
/// numbers, x1 <= x2, y1 <= y2) and "point_2d" (2 finite numbers).
AnswerValidation validate_answer(std::string_view answer_text);

inline bool is_valid(const AnswerValidation& v) {
  return std::holds_alternative<AnswerPayload>(v);
}

/// 1 - distinct/total over whitespace-token n-grams; 0 when there are fewer
/// than n tokens.
double duplicated_ngram_fraction(std::string_view trace, std::size_t n);

/// 1.0 iff the trace has at least one token and its duplicated n-gram
/// fraction is below the configured threshold. An absent trace scores 0.
double score_non_repetitive(const std::optional<std::string>& think_trace,
                            const FormatConfig& cfg = {});

FormatScore score_format(const ParsedResponse& parsed,
                         const FormatConfig& cfg = {});

std::vector<std::string_view> split_whitespace(std::string_view text);

}  // namespace rank_reward::grammar
