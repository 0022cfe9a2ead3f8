#include "ctxmotion/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ctxmotion/errors.hpp"

namespace ctxmotion {

const std::array<std::string, kJointCount>& joint_names() {
  static const std::array<std::string, kJointCount> names = {
      "head",       "neck",       "torso",      "pelvis",     "l_shoulder", "l_elbow",
      "l_wrist",    "l_hand",     "r_shoulder", "r_elbow",    "r_wrist",    "r_hand",
      "l_hip",      "l_knee",     "l_ankle",    "r_hip",      "r_knee",     "r_ankle"};
  return names;
}

std::size_t joint_index(const std::string& name) {
  const auto& names = joint_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw VocabularyError("unknown joint '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

// ---------------------------------------------------------------------------
// Geometry

Skeleton Skeleton::from_flat(const double* values) {
  Skeleton s;
  for (std::size_t j = 0; j < kJointCount; ++j)
    for (std::size_t c = 0; c < 3; ++c) s.joints[j][c] = values[j * 3 + c];
  return s;
}

std::array<double, kJointValues> Skeleton::flat() const {
  std::array<double, kJointValues> out{};
  for (std::size_t j = 0; j < kJointCount; ++j)
    for (std::size_t c = 0; c < 3; ++c) out[j * 3 + c] = joints[j][c];
  return out;
}

Vec3 Skeleton::centroid() const {
  Vec3 c{0.0, 0.0, 0.0};
  for (const auto& p : joints)
    for (std::size_t k = 0; k < 3; ++k) c[k] += p[k];
  for (double& v : c) v /= static_cast<double>(kJointCount);
  return c;
}

BoundingBox BoundingBox::around(const Skeleton& skeleton) {
  BoundingBox b{skeleton.joints[0], skeleton.joints[0]};
  for (const auto& p : skeleton.joints) {
    for (std::size_t k = 0; k < 3; ++k) {
      b.min_corner[k] = std::min(b.min_corner[k], p[k]);
      b.max_corner[k] = std::max(b.max_corner[k], p[k]);
    }
  }
  return b;
}

BoundingBox BoundingBox::from_flat(const double* values) {
  return {{values[0], values[1], values[2]}, {values[3], values[4], values[5]}};
}

std::array<double, kBoxValues> BoundingBox::flat() const {
  return {min_corner[0], min_corner[1], min_corner[2], max_corner[0], max_corner[1], max_corner[2]};
}

std::array<Vec3, 8> BoundingBox::vertices() const {
  std::array<Vec3, 8> out{};
  for (std::size_t v = 0; v < 8; ++v) {
    for (std::size_t k = 0; k < 3; ++k) {
      out[v][k] = (v >> k) & 1U ? max_corner[k] : min_corner[k];
    }
  }
  return out;
}

Vec3 BoundingBox::center() const {
  return {0.5 * (min_corner[0] + max_corner[0]), 0.5 * (min_corner[1] + max_corner[1]),
          0.5 * (min_corner[2] + max_corner[2])};
}

bool BoundingBox::ordered() const {
  return min_corner[0] <= max_corner[0] && min_corner[1] <= max_corner[1] &&
         min_corner[2] <= max_corner[2];
}

Vec3 EntityObservation::center() const {
  return skeleton ? skeleton->centroid() : box.center();
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> names, std::string human) : names_(std::move(names)) {
  const auto it = std::find(names_.begin(), names_.end(), human);
  if (it == names_.end()) {
    throw VocabularyError("human class '" + human + "' is not in the vocabulary");
  }
  human_index_ = static_cast<std::size_t>(it - names_.begin());
  for (std::size_t i = 0; i < names_.size(); ++i)
    for (std::size_t j = i + 1; j < names_.size(); ++j)
      if (names_[i] == names_[j]) throw VocabularyError("duplicate class '" + names_[i] + "'");
}

Vocabulary Vocabulary::standard() {
  return Vocabulary({"human", "table", "box", "cup", "knife", "bottle", "ladder", "sponge", "whisk",
                     "bowl", "cutting_board", "plate", "pan", "chair", "shelf"});
}

std::size_t Vocabulary::index_of(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw VocabularyError("unknown object type '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

std::vector<double> Vocabulary::one_hot(std::size_t index) const {
  if (index >= size()) throw VocabularyError("type index " + std::to_string(index) + " out of range");
  std::vector<double> v(size(), 0.0);
  v[index] = 1.0;
  return v;
}

// ---------------------------------------------------------------------------
// Sequences

std::vector<std::string> SceneSequence::roster() const {
  std::vector<std::string> ids;
  if (!frames.empty())
    for (const auto& e : frames.front().entities) ids.push_back(e.id);
  return ids;
}

std::vector<std::size_t> SceneSequence::human_slots() const {
  std::vector<std::size_t> slots;
  if (!frames.empty())
    for (std::size_t i = 0; i < frames.front().entities.size(); ++i)
      if (frames.front().entities[i].skeleton) slots.push_back(i);
  return slots;
}

namespace {

bool finite(const Vec3& p) { return std::isfinite(p[0]) && std::isfinite(p[1]) && std::isfinite(p[2]); }

}  // namespace

void SceneSequence::validate() const {
  if (frames.empty()) throw SchemaError(0, "scene has no frames");
  const auto ids = roster();
  if (ids.empty()) throw SchemaError(2, "scene roster is empty");
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const std::size_t line = f + 2;
    const auto& entities = frames[f].entities;
    if (entities.size() != ids.size()) {
      throw SchemaError(line, "roster changed: expected " + std::to_string(ids.size()) +
                                  " entities, got " + std::to_string(entities.size()));
    }
    for (std::size_t i = 0; i < entities.size(); ++i) {
      const auto& e = entities[i];
      if (e.id != ids[i]) {
        throw SchemaError(line, "roster changed: expected entity '" + ids[i] + "' at position " +
                                    std::to_string(i) + ", got '" + e.id + "'");
      }
      if (e.type >= vocabulary.size()) throw SchemaError(line, "entity '" + e.id + "' has no valid type");
      const bool human = e.type == vocabulary.human_index();
      if (human != e.skeleton.has_value()) {
        throw SchemaError(line, "entity '" + e.id + "': skeleton must be present exactly for the human class");
      }
      if (!finite(e.box.min_corner) || !finite(e.box.max_corner)) {
        throw SchemaError(line, "entity '" + e.id + "': non-finite box coordinate");
      }
      if (!e.box.ordered()) throw SchemaError(line, "entity '" + e.id + "': box min exceeds max");
      if (e.skeleton) {
        for (const auto& p : e.skeleton->joints)
          if (!finite(p)) throw SchemaError(line, "entity '" + e.id + "': non-finite joint");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Features

std::size_t node_feature_width(std::size_t vocabulary_size) {
  return kBoxValues + vocabulary_size + kJointValues;
}

NodeFeatureMatrix build_node_features(const Frame& frame, const Vocabulary& vocabulary) {
  if (frame.entities.empty()) throw ContractError("build_node_features: empty roster");
  NodeFeatureMatrix x;
  x.rows = frame.entities.size();
  x.width = node_feature_width(vocabulary.size());
  x.values.assign(x.rows * x.width, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto& e = frame.entities[r];
    if (e.type >= vocabulary.size()) {
      throw VocabularyError("entity '" + e.id + "' has type index " + std::to_string(e.type) +
                            " outside a vocabulary of " + std::to_string(vocabulary.size()));
    }
    double* row = x.values.data() + r * x.width;
    const BoundingBox box = e.skeleton ? BoundingBox::around(*e.skeleton) : e.box;
    const auto b = box.flat();
    std::copy(b.begin(), b.end(), row);
    row[kBoxValues + e.type] = 1.0;
    if (e.skeleton) {
      const auto j = e.skeleton->flat();
      std::copy(j.begin(), j.end(), row + kBoxValues + vocabulary.size());
    }
  }
  return x;
}

EntityObservation read_node_features(const NodeFeatureMatrix& x, std::size_t row,
                                     const Vocabulary& vocabulary) {
  const double* r = x.values.data() + row * x.width;
  EntityObservation e;
  e.id = std::to_string(row);
  e.box = BoundingBox::from_flat(r);
  for (std::size_t k = 0; k < vocabulary.size(); ++k)
    if (r[kBoxValues + k] == 1.0) e.type = k;
  if (e.type == vocabulary.human_index()) {
    e.skeleton = Skeleton::from_flat(r + kBoxValues + vocabulary.size());
  }
  return e;
}

SceneSequence resample_100ms(const SceneSequence& raw, int source_hz) {
  if (source_hz <= 0 || source_hz % 10 != 0) {
    throw RateError("cannot resample " + std::to_string(source_hz) +
                    " Hz to 10 Hz with an integer stride");
  }
  const std::size_t stride = static_cast<std::size_t>(source_hz / 10);
  SceneSequence out;
  out.step_ms = kStepMs;
  out.vocabulary = raw.vocabulary;
  for (std::size_t f = 0; f < raw.frames.size(); f += stride) {
    Frame frame = raw.frames[f];
    frame.t_index = static_cast<std::int64_t>(out.frames.size());
    out.frames.push_back(std::move(frame));
  }
  return out;
}

DatasetSplit split_dataset(std::size_t sequence_count, std::uint64_t seed) {
  if (sequence_count < 5) {
    throw SplitError("need at least 5 sequences to split, got " + std::to_string(sequence_count));
  }
  std::vector<std::size_t> order(sequence_count);
  for (std::size_t i = 0; i < sequence_count; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t held = sequence_count / 5;
  DatasetSplit split;
  split.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(held),
                    order.begin() + static_cast<std::ptrdiff_t>(2 * held));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(2 * held), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// ---------------------------------------------------------------------------
// Augmentation

Vec3 RigidTransform::apply(const Vec3& p) const {
  const double a = yaw_degrees * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  return {c * p[0] - s * p[1] + tx, s * p[0] + c * p[1] + ty, p[2]};
}

BoundingBox RigidTransform::apply(const BoundingBox& box) const {
  const auto corners = box.vertices();
  BoundingBox out{apply(corners[0]), apply(corners[0])};
  for (const auto& v : corners) {
    const Vec3 p = apply(v);
    for (std::size_t k = 0; k < 3; ++k) {
      out.min_corner[k] = std::min(out.min_corner[k], p[k]);
      out.max_corner[k] = std::max(out.max_corner[k], p[k]);
    }
  }
  return out;
}

RigidTransform RigidTransform::sample(Rng& rng) {
  RigidTransform t;
  t.yaw_degrees = 180.0 - 360.0 * rng.uniform();  // (-180, 180]
  const auto open = [&rng] {
    double v = -1500.0;
    while (v == -1500.0) v = rng.uniform(-1500.0, 1500.0);
    return v;
  };
  t.tx = open();
  t.ty = open();
  return t;
}

namespace {

Frame transform_frame(const Frame& frame, const RigidTransform& transform) {
  Frame out = frame;
  for (auto& e : out.entities) {
    if (e.skeleton) {
      for (auto& p : e.skeleton->joints) p = transform.apply(p);
      e.box = BoundingBox::around(*e.skeleton);
    } else {
      e.box = transform.apply(e.box);
    }
  }
  return out;
}

}  // namespace

SceneSequence apply_transform(const SceneSequence& seq, const RigidTransform& transform) {
  SceneSequence out = seq;
  for (auto& f : out.frames) f = transform_frame(f, transform);
  return out;
}

SceneSequence augment(const SceneSequence& seq, Rng& rng) {
  return apply_transform(seq, RigidTransform::sample(rng));
}

// ---------------------------------------------------------------------------
// Windows

std::vector<std::size_t> Window::human_slots() const {
  std::vector<std::size_t> slots;
  if (!observed.empty())
    for (std::size_t i = 0; i < observed.front().entities.size(); ++i)
      if (observed.front().entities[i].skeleton) slots.push_back(i);
  return slots;
}

std::vector<SequenceWindow> window_positions(std::size_t frame_count, std::size_t observed,
                                             std::size_t predicted) {
  std::vector<SequenceWindow> out;
  const std::size_t span = observed + predicted;
  for (std::size_t start = 0; start + span <= frame_count; ++start) {
    out.push_back({start, start + observed, start + span - 1});
  }
  return out;
}

Window extract_window(const SceneSequence& seq, const SequenceWindow& w, std::size_t source) {
  if (w.t_f >= seq.frames.size() || w.t_o >= w.t || w.t > w.t_f) {
    throw ContractError("window [" + std::to_string(w.t_o) + ", " + std::to_string(w.t_f) +
                        "] does not fit a sequence of " + std::to_string(seq.frames.size()) +
                        " frames");
  }
  Window out;
  out.source = source;
  out.start = w.t_o;
  out.observed.assign(seq.frames.begin() + static_cast<std::ptrdiff_t>(w.t_o),
                      seq.frames.begin() + static_cast<std::ptrdiff_t>(w.t));
  out.future.assign(seq.frames.begin() + static_cast<std::ptrdiff_t>(w.t),
                    seq.frames.begin() + static_cast<std::ptrdiff_t>(w.t_f + 1));
  return out;
}

std::vector<Window> extract_windows(const std::vector<SceneSequence>& sequences, std::size_t observed,
                                    std::size_t predicted) {
  std::vector<Window> out;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    for (const auto& w : window_positions(sequences[s].frames.size(), observed, predicted)) {
      out.push_back(extract_window(sequences[s], w, s));
    }
  }
  return out;
}

Window transform_window(const Window& w, const RigidTransform& transform) {
  Window out = w;
  for (auto& f : out.observed) f = transform_frame(f, transform);
  for (auto& f : out.future) f = transform_frame(f, transform);
  return out;
}

}  // namespace ctxmotion
