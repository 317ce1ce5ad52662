#include "rank_reward/response_grammar.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace rank_reward::grammar {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool has_non_space(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return !is_space(c); });
}

// Half-open extents of a tag block: [outer_begin, outer_end) covers the tags,
// [inner_begin, inner_end) the content between them.
struct Block {
  std::size_t outer_begin = 0;
  std::size_t outer_end = 0;
  std::size_t inner_begin = 0;
  std::size_t inner_end = 0;

  bool overlaps(const Block& o) const {
    return outer_begin < o.outer_end && o.outer_begin < outer_end;
  }
};

// Pairs the open tag found at `open_pos` with the first close tag after it.
std::optional<Block> pair_at(std::string_view text, std::size_t open_pos,
                             std::string_view open, std::string_view close) {
  const std::size_t inner_begin = open_pos + open.size();
  const std::size_t close_pos = text.find(close, inner_begin);
  if (close_pos == std::string_view::npos) return std::nullopt;
  const auto inner = text.substr(inner_begin, close_pos - inner_begin);
  if (inner.find(open) != std::string_view::npos) return std::nullopt;
  return Block{open_pos, close_pos + close.size(), inner_begin, close_pos};
}

std::optional<Block> find_answer(std::string_view text,
                                 const std::optional<Block>& think) {
  std::size_t pos = 0;
  while (true) {
    const std::size_t open_pos = text.find(kAnswerOpen, pos);
    if (open_pos == std::string_view::npos) return std::nullopt;
    if (think && open_pos >= think->outer_begin && open_pos < think->outer_end) {
      pos = think->outer_end;
      continue;
    }
    auto block = pair_at(text, open_pos, kAnswerOpen, kAnswerClose);
    if (!block) return std::nullopt;
    if (think && block->overlaps(*think)) return std::nullopt;
    return block;
  }
}

std::vector<std::string> find_looks(std::string_view trace) {
  std::vector<std::string> spans;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open_pos = trace.find(kLookOpen, pos);
    if (open_pos == std::string_view::npos) break;
    const std::size_t inner_begin = open_pos + kLookOpen.size();
    const std::size_t close_pos = trace.find(kLookClose, inner_begin);
    if (close_pos == std::string_view::npos) break;
    const auto inner = trace.substr(inner_begin, close_pos - inner_begin);
    // A nested pair is malformed: neither the outer nor the inner span counts.
    if (inner.find(kLookOpen) == std::string_view::npos) {
      spans.emplace_back(inner);
    }
    pos = close_pos + kLookClose.size();
  }
  return spans;
}

const char* check_number_array(const nlohmann::json& value, std::size_t arity) {
  if (!value.is_array()) return "not an array";
  if (value.size() != arity) return "wrong arity";
  for (const auto& v : value) {
    if (!v.is_number()) return "non-numeric entry";
    if (!std::isfinite(v.get<double>())) return "non-finite entry";
  }
  return nullptr;
}

}  // namespace

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) tokens.push_back(text.substr(start, i - start));
  }
  return tokens;
}

ParsedResponse parse_response(std::string_view text) {
  ParsedResponse out;

  std::optional<Block> think;
  if (const auto open_pos = text.find(kThinkOpen);
      open_pos != std::string_view::npos) {
    think = pair_at(text, open_pos, kThinkOpen, kThinkClose);
  }
  const std::optional<Block> answer = find_answer(text, think);

  if (think) {
    const auto trace =
        text.substr(think->inner_begin, think->inner_end - think->inner_begin);
    out.think_trace = std::string(trace);
    out.look_spans = find_looks(trace);
  }
  if (answer) {
    out.answer_text = std::string(text.substr(
        answer->inner_begin, answer->inner_end - answer->inner_begin));
  }

  for (std::size_t i = 0; i < text.size(); ++i) {
    if (think && i >= think->outer_begin && i < think->outer_end) {
      i = think->outer_end - 1;
      continue;
    }
    if (answer && i >= answer->outer_begin && i < answer->outer_end) {
      i = answer->outer_end - 1;
      continue;
    }
    if (!is_space(text[i])) {
      out.trailing_garbage = true;
      break;
    }
  }
  if (think && answer && answer->outer_begin < think->outer_begin) {
    out.trailing_garbage = true;
  }
  return out;
}

std::string render_response(const ParsedResponse& parsed) {
  std::string text;
  if (parsed.think_trace) {
    text.append(kThinkOpen).append(*parsed.think_trace).append(kThinkClose);
  }
  if (parsed.answer_text) {
    text.append(kAnswerOpen).append(*parsed.answer_text).append(kAnswerClose);
  }
  return text;
}

AnswerValidation validate_answer(std::string_view answer_text) {
  const auto doc = nlohmann::json::parse(answer_text.begin(), answer_text.end(),
                                         nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) return SchemaViolation{"answer is not valid JSON"};
  if (!doc.is_array()) return SchemaViolation{"answer must be a JSON array"};

  AnswerPayload payload;
  payload.objects.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& obj = doc[i];
    const std::string where = "object " + std::to_string(i) + ": ";
    if (!obj.is_object()) return SchemaViolation{where + "not a JSON object"};
    for (const auto& [key, _] : obj.items()) {
      if (key != "bbox_2d" && key != "point_2d") {
        return SchemaViolation{where + "unexpected key '" + key + "'"};
      }
    }
    if (!obj.contains("bbox_2d")) return SchemaViolation{where + "missing bbox_2d"};
    if (!obj.contains("point_2d")) return SchemaViolation{where + "missing point_2d"};
    if (const char* err = check_number_array(obj["bbox_2d"], 4)) {
      return SchemaViolation{where + "bbox_2d " + err};
    }
    if (const char* err = check_number_array(obj["point_2d"], 2)) {
      return SchemaViolation{where + "point_2d " + err};
    }
    const auto& b = obj["bbox_2d"];
    const auto& p = obj["point_2d"];
    ObjectPrediction pred{
        BBox{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
             b[3].get<double>()},
        Point{p[0].get<double>(), p[1].get<double>()}};
    if (pred.bbox.x1 > pred.bbox.x2) return SchemaViolation{where + "x1 > x2"};
    if (pred.bbox.y1 > pred.bbox.y2) return SchemaViolation{where + "y1 > y2"};
    payload.objects.push_back(pred);
  }
  return payload;
}

double duplicated_ngram_fraction(std::string_view trace, std::size_t n) {
  const auto tokens = split_whitespace(trace);
  if (n == 0 || tokens.size() < n) return 0.0;
  const std::size_t total = tokens.size() - n + 1;

  std::unordered_set<std::string> distinct;
  distinct.reserve(total);
  std::string key;
  for (std::size_t i = 0; i < total; ++i) {
    key.clear();
    for (std::size_t k = 0; k < n; ++k) {
      key.append(tokens[i + k]);
      key.push_back('\x1f');
    }
    distinct.insert(key);
  }
  return 1.0 - static_cast<double>(distinct.size()) / static_cast<double>(total);
}

double score_non_repetitive(const std::optional<std::string>& think_trace,
                            const FormatConfig& cfg) {
  if (!think_trace) return 0.0;
  if (split_whitespace(*think_trace).empty()) return 0.0;
  return duplicated_ngram_fraction(*think_trace, cfg.ngram) <
                 cfg.repetition_threshold
             ? 1.0
             : 0.0;
}

FormatScore score_format(const ParsedResponse& parsed, const FormatConfig& cfg) {
  FormatScore s;
  const bool structured = parsed.think_trace.has_value() &&
                          parsed.answer_text.has_value() &&
                          !parsed.trailing_garbage;
  s.r_think = structured ? 1.0 : 0.0;

  const bool has_look = std::any_of(
      parsed.look_spans.begin(), parsed.look_spans.end(),
      [](const std::string& span) { return has_non_space(span); });
  s.r_look = (cfg.score_look && structured && has_look) ? 1.0 : 0.0;

  s.r_ans = (parsed.answer_text && is_valid(validate_answer(*parsed.answer_text)))
                ? 1.0
                : 0.0;
  s.r_nr = score_non_repetitive(parsed.think_trace, cfg);
  s.total = s.r_look + s.r_think + s.r_ans + s.r_nr;
  return s;
}

}  // namespace rank_reward::grammar
