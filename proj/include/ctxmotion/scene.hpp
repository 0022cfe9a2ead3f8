#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ctxmotion/random.hpp"

namespace ctxmotion {

using Vec3 = std::array<double, 3>;

inline constexpr std::size_t kJointCount = 18;
inline constexpr std::size_t kJointValues = kJointCount * 3;
inline constexpr std::size_t kBoxValues = 6;
inline constexpr int kStepMs = 100;

/// Fixed joint order of the skeleton layout.
const std::array<std::string, kJointCount>& joint_names();
/// Index into joint_names(); throws VocabularyError for unknown names.
std::size_t joint_index(const std::string& name);

struct Skeleton {
  std::array<Vec3, kJointCount> joints{};

  static Skeleton from_flat(const double* values);
  std::array<double, kJointValues> flat() const;
  /// Centroid of the 18 joints.
  Vec3 centroid() const;
};

struct BoundingBox {
  Vec3 min_corner{};
  Vec3 max_corner{};

  static BoundingBox around(const Skeleton& skeleton);
  static BoundingBox from_flat(const double* values);
  std::array<double, kBoxValues> flat() const;
  /// Corners in (x, y, z) bit order: bit 0 picks max x, bit 1 max y, bit 2 max z.
  std::array<Vec3, 8> vertices() const;
  Vec3 center() const;
  bool ordered() const;
};

/// Ordered class names. One class is the designated human class.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> names, std::string human = "human");

  /// 15 classes, human first.
  static Vocabulary standard();

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t index) const { return names_.at(index); }
  const std::string& human_name() const { return names_.at(human_index_); }
  std::size_t human_index() const { return human_index_; }
  /// Throws VocabularyError for unknown names.
  std::size_t index_of(const std::string& name) const;
  std::vector<double> one_hot(std::size_t index) const;

  bool operator==(const Vocabulary&) const = default;

 private:
  std::vector<std::string> names_;
  std::size_t human_index_ = 0;
};

struct EntityObservation {
  std::string id;
  std::size_t type = 0;
  BoundingBox box;
  std::optional<Skeleton> skeleton;

  /// Joint centroid for humans, box center otherwise.
  Vec3 center() const;
};

struct Frame {
  std::int64_t t_index = 0;
  std::vector<EntityObservation> entities;
  bool predicted = false;
};

struct SceneSequence {
  int step_ms = kStepMs;
  Vocabulary vocabulary;
  std::vector<Frame> frames;

  std::size_t entity_count() const { return frames.empty() ? 0 : frames.front().entities.size(); }
  std::vector<std::string> roster() const;
  /// Roster positions of human entities.
  std::vector<std::size_t> human_slots() const;
  /// Checks the roster is constant, skeletons match the human class and all
  /// coordinates are finite. Throws SchemaError (line = frame record line).
  void validate() const;
};

/// Per-frame node features, one row per entity:
/// [box min (3), box max (3), one-hot type (K), joints (54) or zeros].
struct NodeFeatureMatrix {
  std::size_t rows = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
};

std::size_t node_feature_width(std::size_t vocabulary_size);
NodeFeatureMatrix build_node_features(const Frame& frame, const Vocabulary& vocabulary);
/// Inverse of one row of build_node_features.
EntityObservation read_node_features(const NodeFeatureMatrix& x, std::size_t row,
                                     const Vocabulary& vocabulary);

/// Keeps every (source_hz / 10)-th frame starting at frame 0.
SceneSequence resample_100ms(const SceneSequence& raw, int source_hz);

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Whole-sequence 60/20/20 partition: validation and test get floor(n / 5)
/// each, train keeps the rest. Deterministic in `seed`.
DatasetSplit split_dataset(std::size_t sequence_count, std::uint64_t seed);

/// Rotation about Z (degrees) followed by an XY translation (mm).
struct RigidTransform {
  double yaw_degrees = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  Vec3 apply(const Vec3& p) const;
  /// Rotated corners re-enclosed in an axis-aligned box.
  BoundingBox apply(const BoundingBox& box) const;
  static RigidTransform sample(Rng& rng);
};

SceneSequence apply_transform(const SceneSequence& seq, const RigidTransform& transform);
/// Training-time augmentation: one sampled transform for the whole sequence.
SceneSequence augment(const SceneSequence& seq, Rng& rng);

/// t_o = first observed frame, t = first predicted frame, t_f = last predicted frame.
struct SequenceWindow {
  std::size_t t_o = 0;
  std::size_t t = 10;
  std::size_t t_f = 29;

  std::size_t observed() const { return t - t_o; }
  std::size_t predicted() const { return t_f - t + 1; }
};

/// Observed and future frames of one window, copied out of a sequence.
struct Window {
  std::vector<Frame> observed;
  std::vector<Frame> future;
  std::size_t source = 0;   // index of the originating sequence
  std::size_t start = 0;    // t_o within that sequence

  std::size_t entity_count() const { return observed.empty() ? 0 : observed.front().entities.size(); }
  std::vector<std::size_t> human_slots() const;
};

/// Stride-1 windows: every frame that leaves room for observed + predicted
/// frames starts one window.
std::vector<SequenceWindow> window_positions(std::size_t frame_count, std::size_t observed = 10,
                                             std::size_t predicted = 20);
Window extract_window(const SceneSequence& seq, const SequenceWindow& w, std::size_t source = 0);
std::vector<Window> extract_windows(const std::vector<SceneSequence>& sequences,
                                    std::size_t observed = 10, std::size_t predicted = 20);
/// Same window with every frame mapped through `transform`.
Window transform_window(const Window& w, const RigidTransform& transform);

// Line-delimited scene files: one header record, then one record per frame.
SceneSequence read_scene(std::istream& in);
SceneSequence read_scene_file(const std::string& path);
void write_scene(std::ostream& out, const SceneSequence& seq);
void write_scene_file(const std::string& path, const SceneSequence& seq);

}  // namespace ctxmotion
