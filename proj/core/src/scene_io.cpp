#include "rank_reward/scene_io.hpp"

#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "rank_reward/errors.hpp"
#include "rank_reward/response_grammar.hpp"

namespace rank_reward::io {
namespace {

using nlohmann::json;

json objects_to_json(const AnswerPayload& payload) {
  json arr = json::array();
  for (const auto& o : payload.objects) {
    arr.push_back({{"bbox_2d", {o.bbox.x1, o.bbox.y1, o.bbox.x2, o.bbox.y2}},
                   {"point_2d", {o.point.x, o.point.y}}});
  }
  return arr;
}

std::string read_scene_id(const json& doc) {
  if (!doc.contains("scene_id")) throw FormatError("missing scene_id");
  const auto& id = doc["scene_id"];
  if (id.is_string()) return id.get<std::string>();
  if (id.is_number_integer()) return id.dump();
  throw FormatError("scene_id must be a string or an integer");
}

json parse_object(std::string_view line) {
  auto doc = json::parse(line.begin(), line.end(), nullptr, false);
  if (doc.is_discarded()) throw FormatError("invalid JSON");
  if (!doc.is_object()) throw FormatError("record must be a JSON object");
  return doc;
}

double finite_number(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_number()) {
    throw FormatError(std::string("missing numeric field '") + key + "'");
  }
  const double v = doc[key].get<double>();
  if (!std::isfinite(v)) throw FormatError(std::string(key) + " must be finite");
  return v;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

template <class Record, class Parse>
std::vector<Record> read_lines(std::istream& in, Parse parse) {
  std::vector<Record> records;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    try {
      Record r = parse(line);
      if (!seen.insert(r.scene_id).second) {
        throw FormatError("duplicate scene_id '" + r.scene_id + "'");
      }
      records.push_back(std::move(r));
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace

std::string answer_to_json(const AnswerPayload& payload) {
  return objects_to_json(payload).dump();
}

std::string scene_to_json(const SceneRecord& scene) {
  json objects = json::array();
  for (std::size_t k = 0; k < scene.gt.boxes.size(); ++k) {
    const auto& b = scene.gt.boxes[k];
    const auto& p = scene.gt.points[k];
    objects.push_back({{"bbox_2d", {b.x1, b.y1, b.x2, b.y2}},
                       {"point_2d", {p.x, p.y}}});
  }
  json doc = {{"scene_id", scene.scene_id},
              {"width", scene.width},
              {"height", scene.height},
              {"objects", objects}};
  return doc.dump();
}

SceneRecord scene_from_json(std::string_view line) {
  const json doc = parse_object(line);
  SceneRecord scene;
  scene.scene_id = read_scene_id(doc);
  scene.width = finite_number(doc, "width");
  scene.height = finite_number(doc, "height");
  if (!doc.contains("objects")) throw FormatError("missing objects");
  // Ground-truth objects follow the answer schema exactly.
  const auto validation = grammar::validate_answer(doc["objects"].dump());
  if (const auto* bad = std::get_if<grammar::SchemaViolation>(&validation)) {
    throw FormatError("objects: " + bad->reason);
  }
  for (const auto& o : std::get<AnswerPayload>(validation).objects) {
    scene.gt.boxes.push_back(o.bbox);
    scene.gt.points.push_back(o.point);
  }
  return scene;
}

std::vector<SceneRecord> read_scenes(std::istream& in) {
  return read_lines<SceneRecord>(in, [](const std::string& l) {
    return scene_from_json(l);
  });
}

void write_scenes(std::ostream& out, std::span<const SceneRecord> scenes) {
  for (const auto& s : scenes) out << scene_to_json(s) << '\n';
}

std::string prediction_to_json(const PredictionRecord& pred) {
  json doc = {{"scene_id", pred.scene_id}};
  if (!pred.text.empty()) doc["text"] = pred.text;
  doc["objects"] = objects_to_json(pred.payload);
  return doc.dump();
}

PredictionRecord prediction_from_json(std::string_view line) {
  const json doc = parse_object(line);
  PredictionRecord pred;
  pred.scene_id = read_scene_id(doc);
  if (doc.contains("text")) {
    if (!doc["text"].is_string()) throw FormatError("text must be a string");
    pred.text = doc["text"].get<std::string>();
  }

  std::optional<grammar::AnswerValidation> validation;
  if (doc.contains("objects")) {
    validation = grammar::validate_answer(doc["objects"].dump());
  } else if (doc.contains("text")) {
    const auto parsed = grammar::parse_response(pred.text);
    if (parsed.answer_text) {
      validation = grammar::validate_answer(*parsed.answer_text);
    } else {
      validation = grammar::SchemaViolation{"no answer block"};
    }
  } else {
    throw FormatError("prediction needs 'objects' or 'text'");
  }
  if (auto* payload = std::get_if<AnswerPayload>(&*validation)) {
    pred.payload = std::move(*payload);
  } else {
    pred.valid = false;
  }
  return pred;
}

std::vector<PredictionRecord> read_predictions(std::istream& in) {
  return read_lines<PredictionRecord>(in, [](const std::string& l) {
    return prediction_from_json(l);
  });
}

}  // namespace rank_reward::io
