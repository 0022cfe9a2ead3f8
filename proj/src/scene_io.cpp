#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctxmotion/errors.hpp"
#include "ctxmotion/scene.hpp"

namespace ctxmotion {

using nlohmann::json;

namespace {

Vec3 read_point(const json& j, std::size_t line, const char* what) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(line, std::string(what) + " must be 3 numbers");
  Vec3 p{};
  for (std::size_t k = 0; k < 3; ++k) {
    if (!j[k].is_number()) throw SchemaError(line, std::string(what) + " must be 3 numbers");
    p[k] = j[k].get<double>();
  }
  return p;
}

json point_json(const Vec3& p) { return json::array({p[0], p[1], p[2]}); }

EntityObservation read_entity(const json& j, const Vocabulary& vocab, std::size_t line) {
  if (!j.is_object()) throw SchemaError(line, "entity record must be an object");
  EntityObservation e;
  if (!j.contains("id") || !j["id"].is_string()) throw SchemaError(line, "entity without string 'id'");
  e.id = j["id"].get<std::string>();
  if (!j.contains("type") || !j["type"].is_string()) {
    throw SchemaError(line, "entity '" + e.id + "' without string 'type'");
  }
  try {
    e.type = vocab.index_of(j["type"].get<std::string>());
  } catch (const VocabularyError& err) {
    throw SchemaError(line, err.what());
  }
  const bool human = e.type == vocab.human_index();
  if (j.contains("joints")) {
    if (!human) throw SchemaError(line, "entity '" + e.id + "' is not human but has joints");
    const json& joints = j["joints"];
    if (!joints.is_array() || joints.size() != kJointValues) {
      throw SchemaError(line, "entity '" + e.id + "': joints must hold " +
                                  std::to_string(kJointValues) + " numbers");
    }
    std::array<double, kJointValues> flat{};
    for (std::size_t k = 0; k < kJointValues; ++k) {
      if (!joints[k].is_number()) throw SchemaError(line, "entity '" + e.id + "': joints must be numbers");
      flat[k] = joints[k].get<double>();
    }
    e.skeleton = Skeleton::from_flat(flat.data());
    e.box = BoundingBox::around(*e.skeleton);
  } else if (human) {
    throw SchemaError(line, "human entity '" + e.id + "' without joints");
  }
  if (!human) {
    if (!j.contains("box") || !j["box"].is_object()) {
      throw SchemaError(line, "entity '" + e.id + "' without 'box'");
    }
    e.box.min_corner = read_point(j["box"].value("min", json()), line, "box.min");
    e.box.max_corner = read_point(j["box"].value("max", json()), line, "box.max");
  }
  return e;
}

}  // namespace

SceneSequence read_scene(std::istream& in) {
  SceneSequence seq;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& err) {
      throw SchemaError(line, std::string("malformed record: ") + err.what());
    }
    if (!record.is_object()) throw SchemaError(line, "record must be an object");
    if (!have_header) {
      if (!record.contains("step_ms") || !record["step_ms"].is_number_integer() ||
          record["step_ms"].get<int>() <= 0) {
        throw SchemaError(line, "header needs a positive integer 'step_ms'");
      }
      seq.step_ms = record["step_ms"].get<int>();
      if (!record.contains("vocabulary") || !record["vocabulary"].is_array()) {
        throw SchemaError(line, "header needs a 'vocabulary' list");
      }
      std::vector<std::string> names;
      for (const auto& n : record["vocabulary"]) {
        if (!n.is_string()) throw SchemaError(line, "vocabulary entries must be strings");
        names.push_back(n.get<std::string>());
      }
      try {
        seq.vocabulary = Vocabulary(names, record.value("human_type", std::string("human")));
      } catch (const VocabularyError& err) {
        throw SchemaError(line, err.what());
      }
      if (!record.contains("joint_names") || !record["joint_names"].is_array() ||
          record["joint_names"].size() != kJointCount) {
        throw SchemaError(line, "header needs 18 'joint_names'");
      }
      for (std::size_t k = 0; k < kJointCount; ++k) {
        if (record["joint_names"][k] != joint_names()[k]) {
          throw SchemaError(line, "joint " + std::to_string(k) + " must be '" + joint_names()[k] + "'");
        }
      }
      have_header = true;
      continue;
    }
    Frame frame;
    if (!record.contains("t_index") || !record["t_index"].is_number_integer()) {
      throw SchemaError(line, "frame record without integer 't_index'");
    }
    frame.t_index = record["t_index"].get<std::int64_t>();
    frame.predicted = record.value("predicted", false);
    if (!record.contains("entities") || !record["entities"].is_array()) {
      throw SchemaError(line, "frame record without 'entities' list");
    }
    for (const auto& e : record["entities"]) frame.entities.push_back(read_entity(e, seq.vocabulary, line));
    if (!seq.frames.empty()) {
      const auto& first = seq.frames.front().entities;
      if (frame.entities.size() != first.size()) {
        throw SchemaError(line, "roster changed: expected " + std::to_string(first.size()) +
                                    " entities, got " + std::to_string(frame.entities.size()));
      }
      for (std::size_t i = 0; i < first.size(); ++i) {
        if (frame.entities[i].id != first[i].id) {
          throw SchemaError(line, "roster changed: expected '" + first[i].id + "' at position " +
                                      std::to_string(i) + ", got '" + frame.entities[i].id + "'");
        }
      }
    }
    for (const auto& e : frame.entities) {
      if (!e.box.ordered()) throw SchemaError(line, "entity '" + e.id + "': box min exceeds max");
    }
    seq.frames.push_back(std::move(frame));
  }
  if (!have_header) throw SchemaError(0, "empty scene file");
  seq.validate();
  return seq;
}

SceneSequence read_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ResourceError("cannot open scene file '" + path + "'");
  try {
    return read_scene(in);
  } catch (const SchemaError& err) {
    throw SchemaError(err.line(), path + ": " + err.detail());
  }
}

void write_scene(std::ostream& out, const SceneSequence& seq) {
  json header = {{"step_ms", seq.step_ms},
                 {"vocabulary", seq.vocabulary.names()},
                 {"human_type", seq.vocabulary.human_name()},
                 {"joint_names", joint_names()}};
  out << header.dump() << '\n';
  for (const auto& frame : seq.frames) {
    json entities = json::array();
    for (const auto& e : frame.entities) {
      json rec = {{"id", e.id},
                  {"type", seq.vocabulary.name(e.type)},
                  {"box", {{"min", point_json(e.box.min_corner)}, {"max", point_json(e.box.max_corner)}}}};
      if (e.skeleton) rec["joints"] = e.skeleton->flat();
      entities.push_back(std::move(rec));
    }
    json rec = {{"t_index", frame.t_index}, {"entities", std::move(entities)}};
    if (frame.predicted) rec["predicted"] = true;
    out << rec.dump() << '\n';
  }
}

void write_scene_file(const std::string& path, const SceneSequence& seq) {
  std::ofstream out(path);
  if (!out) throw ResourceError("cannot write scene file '" + path + "'");
  write_scene(out, seq);
}

}  // namespace ctxmotion
