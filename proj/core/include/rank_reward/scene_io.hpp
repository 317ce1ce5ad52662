#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rank_reward/geometry.hpp"

namespace rank_reward::io {

/// One line of a ground-truth JSONL file:
/// {"scene_id", "width", "height", "objects": [{"bbox_2d": [4], "point_2d": [2]}]}
struct SceneRecord {
  std::string scene_id;
  double width = 0.0;
  double height = 0.0;
  GroundTruth gt;

  friend bool operator==(const SceneRecord&, const SceneRecord&) = default;
};

/// One line of a predictions JSONL file. A record carries either "objects"
/// (answer schema) or "text" (a full response whose answer block is parsed).
/// Records whose answer fails validation are kept with an empty payload and
/// `valid = false`.
struct PredictionRecord {
  std::string scene_id;
  AnswerPayload payload;
  bool valid = true;
  std::string text;
};

std::string scene_to_json(const SceneRecord& scene);
/// Throws FormatError on malformed records.
SceneRecord scene_from_json(std::string_view line);

/// Reads every non-blank line. Throws FormatError on malformed lines or a
/// duplicate scene_id (the message names the line number).
std::vector<SceneRecord> read_scenes(std::istream& in);
void write_scenes(std::ostream& out, std::span<const SceneRecord> scenes);

std::string prediction_to_json(const PredictionRecord& pred);
PredictionRecord prediction_from_json(std::string_view line);
std::vector<PredictionRecord> read_predictions(std::istream& in);

/// Serializes an answer payload in the canonical answer wire format.
std::string answer_to_json(const AnswerPayload& payload);

}  // namespace rank_reward::io
