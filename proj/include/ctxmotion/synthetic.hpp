#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ctxmotion/scene.hpp"

namespace ctxmotion::synthetic {

enum class ScenarioKind { PickPlace, PassObject, StaticClutter };

std::string kind_name(ScenarioKind kind);
/// pick_place, pass_object or static_clutter; anything else is a SpecError.
ScenarioKind parse_kind(const std::string& name);

/// With zero noise no joint or box corner moves more than this between two
/// consecutive frames. Walking peaks at 150 mm/frame, turning is limited to
/// 15 deg/frame and the reach motion spreads over at least three frames.
inline constexpr double kMaxStepDisplacementMm = 450.0;
inline constexpr double kDefaultNoiseMm = 5.0;
inline constexpr std::size_t kMinDuration = 30;

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::PickPlace;
  std::size_t duration = 60;  // frames at 100 ms
  double noise_mm = kDefaultNoiseMm;
  std::uint64_t seed = 0;
  /// Entity types in roster order; empty picks the default roster of the kind.
  std::vector<std::string> roster;

  /// pick_place: human, cup, table, box, bottle.
  /// pass_object: human, human, bottle, table, box.
  /// static_clutter: human, table, cup, box, plate.
  static std::vector<std::string> default_roster(ScenarioKind kind);
  std::vector<std::string> resolved_roster() const;
  void validate(const Vocabulary& vocabulary) const;
};

/// An object rigidly following one joint of a human over frames [first, last).
struct Attachment {
  std::string human;
  std::string object;
  std::size_t joint = 0;
  std::size_t first = 0;
  std::size_t last = 0;
};

struct CausalPair {
  std::size_t frame = 0;
  std::string src;
  std::string dst;
  bool operator==(const CausalPair&) const = default;
};

struct GroundTruthInteractions {
  std::vector<Attachment> attachments;

  /// One (frame, human, object) pair for every attached frame, frame-ordered.
  std::vector<CausalPair> pairs() const;
  bool holds(std::size_t frame, const std::string& src, const std::string& dst) const;
};

/// Deterministic in the spec. Throws SpecError for invalid specs.
std::pair<SceneSequence, GroundTruthInteractions> generate(const ScenarioSpec& spec,
                                                           const Vocabulary& vocabulary = Vocabulary::standard());

/// Sidecar CSV `frame,src,dst`.
void write_ground_truth_csv(std::ostream& out, const GroundTruthInteractions& truth);
std::vector<CausalPair> read_ground_truth_csv(std::istream& in);

}  // namespace ctxmotion::synthetic
