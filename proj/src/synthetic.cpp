#include "ctxmotion/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include "ctxmotion/errors.hpp"
#include "ctxmotion/random.hpp"

namespace ctxmotion::synthetic {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTurnLimit = 15.0 * kPi / 180.0;
constexpr double kWalkSpeed = 100.0;     // mean mm per frame over a walk
constexpr double kHalfStride = 700.0;    // mm walked per half gait cycle
constexpr double kHoldOffset = -60.0;    // object centre below the hand, mm

// Local body frame: x forward, y left, z up, origin on the floor under the pelvis.
using Layout = std::array<Vec3, kJointCount>;

const Layout& rest_layout() {
  static const Layout layout = {{
      {0, 0, 1650}, {0, 0, 1500}, {0, 0, 1250}, {0, 0, 950},
      {0, 180, 1450}, {0, 200, 1180}, {0, 210, 950}, {0, 210, 860},
      {0, -180, 1450}, {0, -200, 1180}, {0, -210, 950}, {0, -210, 860},
      {0, 100, 930}, {0, 100, 500}, {0, 100, 80},
      {0, -100, 930}, {0, -100, 500}, {0, -100, 80},
  }};
  return layout;
}

// Right arm stretched forward at table height.
const Layout& reach_layout() {
  static const Layout layout = [] {
    Layout l = rest_layout();
    l[9] = {180, -200, 1220};
    l[10] = {380, -200, 1000};
    l[11] = {450, -200, 930};
    return l;
  }();
  return layout;
}

struct ActorState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // radians, 0 = +x
  double reach = 0.0;    // 0 rest, 1 right arm extended
  double gait = 0.0;     // leg phase; multiples of pi mean feet together
};

Skeleton pose(const ActorState& s) {
  const Layout& rest = rest_layout();
  const Layout& reach = reach_layout();
  const double swing = std::sin(s.gait);
  Skeleton out;
  const double c = std::cos(s.heading), sn = std::sin(s.heading);
  for (std::size_t j = 0; j < kJointCount; ++j) {
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = rest[j][k] + s.reach * (reach[j][k] - rest[j][k]);
    switch (j) {
      case 13: p[0] += 70.0 * swing; break;    // l_knee
      case 14: p[0] += 150.0 * swing; break;   // l_ankle
      case 16: p[0] -= 70.0 * swing; break;    // r_knee
      case 17: p[0] -= 150.0 * swing; break;   // r_ankle
      case 6: case 7: p[0] -= 60.0 * swing; break;
      case 10: case 11: p[0] += 60.0 * swing * (1.0 - s.reach); break;
      default: break;
    }
    out.joints[j] = {s.x + c * p[0] - sn * p[1], s.y + sn * p[0] + c * p[1], p[2]};
  }
  return out;
}

double wrap(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

double turn_towards(double from, double to) {
  const double d = wrap(to - from);
  return from + std::clamp(d, -kTurnLimit, kTurnLimit);
}

double smoothstep(double a) { return a * a * (3.0 - 2.0 * a); }

// Appends per-frame actor states; frame 0 is the initial state.
class Track {
 public:
  explicit Track(ActorState start) { states_.push_back(start); }

  const ActorState& last() const { return states_.back(); }
  std::size_t frames() const { return states_.size(); }
  const std::vector<ActorState>& states() const { return states_; }

  // Stand in place, blending reach linearly and turning toward `face`.
  void hold(std::size_t n, double reach_to, std::optional<double> face = std::nullopt) {
    const ActorState start = last();
    for (std::size_t k = 1; k <= n; ++k) {
      ActorState s = last();
      s.reach = start.reach + (reach_to - start.reach) * static_cast<double>(k) / static_cast<double>(n);
      if (face) s.heading = turn_towards(s.heading, *face);
      states_.push_back(s);
    }
  }

  // Smoothstep walk to (x, y) facing the direction of travel.
  void walk(std::size_t n, double x, double y) {
    const ActorState start = last();
    const double dx = x - start.x, dy = y - start.y;
    const double dist = std::hypot(dx, dy);
    const double direction = std::atan2(dy, dx);
    const double half_cycles = std::max(1.0, std::round(dist / kHalfStride));
    for (std::size_t k = 1; k <= n; ++k) {
      const double a = smoothstep(static_cast<double>(k) / static_cast<double>(n));
      ActorState s = last();
      s.x = start.x + a * dx;
      s.y = start.y + a * dy;
      if (dist > 1.0) s.heading = turn_towards(s.heading, direction);
      s.gait = start.gait + a * half_cycles * kPi;
      states_.push_back(s);
    }
  }

 private:
  std::vector<ActorState> states_;
};

Vec3 hand_of(const ActorState& s) { return pose(s).joints[11]; }

Vec3 size_of(const std::string& type) {
  static const std::map<std::string, Vec3> sizes = {
      {"table", {1000, 1000, 0}},  {"box", {300, 200, 200}},   {"cup", {80, 80, 100}},
      {"knife", {200, 30, 20}},    {"bottle", {70, 70, 250}},  {"ladder", {500, 100, 1800}},
      {"sponge", {100, 70, 40}},   {"whisk", {250, 60, 60}},   {"bowl", {160, 160, 80}},
      {"cutting_board", {350, 250, 25}}, {"plate", {250, 250, 25}}, {"pan", {300, 300, 60}},
      {"chair", {450, 450, 900}},  {"shelf", {800, 350, 1800}},
  };
  const auto it = sizes.find(type);
  return it == sizes.end() ? Vec3{150, 150, 100} : it->second;
}

BoundingBox box_at(const Vec3& center, const Vec3& size) {
  BoundingBox b;
  for (int k = 0; k < 3; ++k) {
    b.min_corner[k] = center[k] - size[k] / 2.0;
    b.max_corner[k] = center[k] + size[k] / 2.0;
  }
  return b;
}

// Boxes resting on the floor (tables get a top height).
BoundingBox floor_box(double x, double y, const Vec3& size, double height) {
  return box_at({x, y, height / 2.0}, {size[0], size[1], height});
}

std::size_t phase(double fraction, std::size_t transitions) {
  return static_cast<std::size_t>(std::lround(fraction * static_cast<double>(transitions)));
}

double walk_distance(Rng& rng, std::size_t frames) {
  const double cap = std::min(1800.0, kWalkSpeed * static_cast<double>(frames));
  return rng.uniform(0.6, 1.0) * cap;
}

class Builder {
 public:
  Builder(const ScenarioSpec& spec, const Vocabulary& vocab)
      : spec_(spec), vocab_(vocab), types_(spec.resolved_roster()), rng_(spec.seed) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : types_) ids_.push_back(t + "_" + std::to_string(counts[t]++));
    tracks_.resize(types_.size());
    boxes_.resize(types_.size());
  }

  std::pair<SceneSequence, GroundTruthInteractions> run() {
    switch (spec_.kind) {
      case ScenarioKind::PickPlace: pick_place(); break;
      case ScenarioKind::PassObject: pass_object(); break;
      case ScenarioKind::StaticClutter: static_clutter(); break;
    }
    return {assemble(), truth_};
  }

 private:
  bool is_human(std::size_t i) const { return types_[i] == vocab_.human_name(); }

  std::vector<std::size_t> humans() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < types_.size(); ++i)
      if (is_human(i)) out.push_back(i);
    return out;
  }

  std::size_t target_object() const {
    for (std::size_t i = 0; i < types_.size(); ++i)
      if (!is_human(i) && types_[i] != "table") return i;
    for (std::size_t i = 0; i < types_.size(); ++i)
      if (!is_human(i)) return i;
    throw SpecError("scenario needs at least one object");
  }

  std::optional<std::size_t> table_other_than(std::size_t target) const {
    for (std::size_t i = 0; i < types_.size(); ++i)
      if (i != target && types_[i] == "table") return i;
    return std::nullopt;
  }

  std::size_t transitions() const { return spec_.duration - 1; }

  void attach(std::size_t object, std::size_t human, std::size_t first, std::size_t last) {
    truth_.attachments.push_back({ids_[human], ids_[object], 11, first, last});
  }

  // Centre of the attached object at every frame: hand + offset while
  // attached, frozen at the last attached position afterwards, and at the
  // first attached position before.
  std::vector<Vec3> carried_path(std::size_t object) const {
    std::vector<std::optional<Vec3>> path(spec_.duration);
    for (const auto& a : truth_.attachments) {
      if (a.object != ids_[object]) continue;
      const std::size_t h = index_of(a.human);
      for (std::size_t f = a.first; f < a.last; ++f) {
        Vec3 p = hand_of(tracks_[h][f]);
        p[2] += kHoldOffset;
        path[f] = p;
      }
    }
    std::vector<Vec3> out(spec_.duration);
    std::optional<Vec3> prev;
    std::size_t first_known = spec_.duration;
    for (std::size_t f = 0; f < spec_.duration; ++f) {
      if (path[f]) {
        prev = path[f];
        first_known = std::min(first_known, f);
      }
      if (prev) out[f] = *prev;
    }
    for (std::size_t f = 0; f < first_known && first_known < spec_.duration; ++f) out[f] = *path[first_known];
    return out;
  }

  std::size_t index_of(const std::string& id) const {
    return static_cast<std::size_t>(std::find(ids_.begin(), ids_.end(), id) - ids_.begin());
  }

  ActorState random_standing(double cx, double cy, double r_lo, double r_hi) {
    const double a = rng_.uniform(-kPi, kPi);
    const double r = rng_.uniform(r_lo, r_hi);
    ActorState s;
    s.x = cx + r * std::cos(a);
    s.y = cy + r * std::sin(a);
    s.heading = rng_.uniform(-kPi, kPi);
    return s;
  }

  // Stationary entities not yet placed: bystander humans and distractor objects.
  void place_rest(double cx, double cy, std::vector<std::array<double, 2>> occupied) {
    for (std::size_t i = 0; i < types_.size(); ++i) {
      if (!tracks_[i].empty() || !boxes_[i].empty()) continue;
      std::array<double, 2> spot{};
      for (int attempt = 0; attempt < 200; ++attempt) {
        const double a = rng_.uniform(-kPi, kPi);
        const double r = rng_.uniform(1500.0, 3500.0);
        spot = {cx + r * std::cos(a), cy + r * std::sin(a)};
        bool clear = true;
        for (const auto& o : occupied) clear = clear && std::hypot(o[0] - spot[0], o[1] - spot[1]) > 700.0;
        if (clear) break;
      }
      occupied.push_back(spot);
      if (is_human(i)) {
        ActorState s;
        s.x = spot[0];
        s.y = spot[1];
        s.heading = rng_.uniform(-kPi, kPi);
        tracks_[i].assign(spec_.duration, s);
      } else {
        const Vec3 size = size_of(types_[i]);
        const double height = types_[i] == "table" ? 720.0 : size[2];
        boxes_[i].assign(spec_.duration, floor_box(spot[0], spot[1], size, height));
      }
    }
  }

  void pick_place() {
    const std::size_t actor = humans().at(0);
    const std::size_t target = target_object();
    const auto table = table_other_than(target);
    const std::size_t n = transitions();
    const std::size_t walk1 = phase(0.3, n);
    const std::size_t reach = std::max<std::size_t>(3, phase(0.1, n));
    const std::size_t carry = phase(0.35, n);
    const std::size_t place = std::max<std::size_t>(1, phase(0.1, n));
    const std::size_t retract = n - walk1 - reach - carry - place;

    ActorState start;
    start.x = rng_.uniform(-500.0, 500.0);
    start.y = rng_.uniform(-500.0, 500.0);
    const double dir1 = rng_.uniform(-kPi, kPi);
    start.heading = dir1;
    const double d1 = walk_distance(rng_, walk1);
    Track track(start);
    track.walk(walk1, start.x + d1 * std::cos(dir1), start.y + d1 * std::sin(dir1));
    track.hold(reach, 1.0, dir1);
    const std::size_t grasp = track.frames() - 1;
    const double dir2 = track.last().heading + rng_.uniform(-100.0, 100.0) * kPi / 180.0;
    const double d2 = walk_distance(rng_, carry);
    track.walk(carry, track.last().x + d2 * std::cos(dir2), track.last().y + d2 * std::sin(dir2));
    track.hold(place, 1.0, dir2);
    const std::size_t release = track.frames() - 1;
    track.hold(retract, 0.0, dir2);
    tracks_[actor] = track.states();

    attach(target, actor, grasp, release);
    const auto path = carried_path(target);
    const Vec3 size = size_of(types_[target]);
    for (const Vec3& c : path) boxes_[target].push_back(box_at(c, size));

    std::vector<std::array<double, 2>> occupied;
    for (const auto& s : tracks_[actor]) occupied.push_back({s.x, s.y});
    occupied.push_back({path.front()[0], path.front()[1]});
    if (table) {
      // Table top just under the released object, its near edge below the hand.
      const Vec3 drop = path.back();
      const double top = drop[2] - size[2] / 2.0;
      const Vec3 tsize = size_of("table");
      const double cx = drop[0] + 350.0 * std::cos(dir2);
      const double cy = drop[1] + 350.0 * std::sin(dir2);
      boxes_[*table].assign(spec_.duration, floor_box(cx, cy, tsize, top));
      occupied.push_back({cx, cy});
    }
    place_rest(start.x, start.y, occupied);
  }

  void pass_object() {
    const auto hs = humans();
    if (hs.size() < 2) throw SpecError("pass_object needs two humans");
    const std::size_t giver = hs[0], taker = hs[1];
    const std::size_t object = target_object();
    const std::size_t n = transitions();
    const std::size_t approach = phase(0.35, n);
    const std::size_t pause = std::max<std::size_t>(1, phase(0.1, n));
    const std::size_t reach = std::max<std::size_t>(3, phase(0.1, n));
    const std::size_t leave = phase(0.35, n);

    ActorState a0;
    a0.x = rng_.uniform(-500.0, 500.0);
    a0.y = rng_.uniform(-500.0, 500.0);
    a0.heading = rng_.uniform(-kPi, kPi);
    a0.reach = 1.0;
    Track a(a0);
    const double da = walk_distance(rng_, approach);
    a.walk(approach, a0.x + da * std::cos(a0.heading), a0.y + da * std::sin(a0.heading));
    a.hold(pause, 1.0, a0.heading);
    const std::size_t handover = a.frames() - 1;
    a.hold(reach, 0.0);
    a.hold(n + 1 - a.frames(), 0.0);

    // Taker faces the giver with the right hand exactly where the giver's is.
    const ActorState& at = a.states()[handover];
    const Vec3 meet = hand_of(at);
    ActorState b0;
    b0.heading = wrap(at.heading + kPi);
    b0.reach = 1.0;
    const Vec3 offset = hand_of(b0);
    b0.x = meet[0] - offset[0];
    b0.y = meet[1] - offset[1];
    b0.reach = 0.0;
    Track b(b0);
    b.hold(handover - reach, 0.0);
    b.hold(reach, 1.0);
    const double dir = b0.heading + rng_.uniform(-60.0, 60.0) * kPi / 180.0;
    const double db = walk_distance(rng_, leave);
    b.walk(leave, b0.x + db * std::cos(dir), b0.y + db * std::sin(dir));
    b.hold(n + 1 - b.frames(), 1.0);
    tracks_[giver] = a.states();
    tracks_[taker] = b.states();

    attach(object, giver, 0, handover);
    attach(object, taker, handover, spec_.duration);
    const Vec3 size = size_of(types_[object]);
    std::vector<std::array<double, 2>> occupied;
    for (const auto& s : tracks_[giver]) occupied.push_back({s.x, s.y});
    for (const auto& s : tracks_[taker]) occupied.push_back({s.x, s.y});
    for (const Vec3& c : carried_path(object)) boxes_[object].push_back(box_at(c, size));
    place_rest(a0.x, a0.y, occupied);
  }

  void static_clutter() {
    const auto hs = humans();
    std::vector<std::array<double, 2>> occupied;
    if (!hs.empty()) {
      const ActorState s = random_standing(0.0, 0.0, 0.0, 500.0);
      tracks_[hs[0]].assign(spec_.duration, s);
      occupied.push_back({s.x, s.y});
    }
    place_rest(0.0, 0.0, occupied);
  }

  SceneSequence assemble() {
    Rng noise(spec_.seed ^ 0xA5A5A5A55A5A5A5AULL);
    const double sigma = spec_.noise_mm;
    const auto jitter = [&](double v) { return sigma > 0.0 ? v + sigma * noise.normal() : v; };
    SceneSequence seq;
    seq.vocabulary = vocab_;
    for (std::size_t f = 0; f < spec_.duration; ++f) {
      Frame frame;
      frame.t_index = static_cast<std::int64_t>(f);
      for (std::size_t i = 0; i < types_.size(); ++i) {
        EntityObservation e;
        e.id = ids_[i];
        e.type = vocab_.index_of(types_[i]);
        if (is_human(i)) {
          Skeleton s = pose(tracks_[i][f]);
          for (auto& j : s.joints)
            for (double& v : j) v = jitter(v);
          e.box = BoundingBox::around(s);
          e.skeleton = s;
        } else {
          BoundingBox b = boxes_[i][f];
          for (int k = 0; k < 3; ++k) {
            double lo = jitter(b.min_corner[k]), hi = jitter(b.max_corner[k]);
            if (lo > hi) std::swap(lo, hi);
            b.min_corner[k] = lo;
            b.max_corner[k] = hi;
          }
          e.box = b;
        }
        frame.entities.push_back(std::move(e));
      }
      seq.frames.push_back(std::move(frame));
    }
    seq.validate();
    return seq;
  }

  const ScenarioSpec& spec_;
  const Vocabulary& vocab_;
  std::vector<std::string> types_;
  std::vector<std::string> ids_;
  Rng rng_;
  std::vector<std::vector<ActorState>> tracks_;
  std::vector<std::vector<BoundingBox>> boxes_;
  GroundTruthInteractions truth_;
};

}  // namespace

std::string kind_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::PickPlace: return "pick_place";
    case ScenarioKind::PassObject: return "pass_object";
    case ScenarioKind::StaticClutter: return "static_clutter";
  }
  return "?";
}

ScenarioKind parse_kind(const std::string& name) {
  for (ScenarioKind k : {ScenarioKind::PickPlace, ScenarioKind::PassObject, ScenarioKind::StaticClutter})
    if (kind_name(k) == name) return k;
  throw SpecError("unknown scenario kind '" + name + "'");
}

std::vector<std::string> ScenarioSpec::default_roster(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::PickPlace: return {"human", "cup", "table", "box", "bottle"};
    case ScenarioKind::PassObject: return {"human", "human", "bottle", "table", "box"};
    case ScenarioKind::StaticClutter: return {"human", "table", "cup", "box", "plate"};
  }
  return {};
}

std::vector<std::string> ScenarioSpec::resolved_roster() const {
  return roster.empty() ? default_roster(kind) : roster;
}

void ScenarioSpec::validate(const Vocabulary& vocabulary) const {
  if (duration < kMinDuration) {
    throw SpecError("duration " + std::to_string(duration) + " is shorter than one window (" +
                    std::to_string(kMinDuration) + " frames)");
  }
  if (!(noise_mm >= 0.0) || !std::isfinite(noise_mm)) throw SpecError("noise amplitude must be finite and >= 0");
  const auto types = resolved_roster();
  std::size_t humans = 0, objects = 0;
  for (const auto& t : types) {
    try {
      vocabulary.index_of(t);
    } catch (const VocabularyError&) {
      throw SpecError("roster type '" + t + "' is not in the vocabulary");
    }
    (t == vocabulary.human_name() ? humans : objects)++;
  }
  if (types.empty()) throw SpecError("empty roster");
  if (kind == ScenarioKind::PickPlace && (humans < 1 || objects < 1)) {
    throw SpecError("pick_place needs a human and an object");
  }
  if (kind == ScenarioKind::PassObject && (humans < 2 || objects < 1)) {
    throw SpecError("pass_object needs two humans and an object");
  }
}

std::vector<CausalPair> GroundTruthInteractions::pairs() const {
  std::vector<CausalPair> out;
  for (const auto& a : attachments)
    for (std::size_t f = a.first; f < a.last; ++f) out.push_back({f, a.human, a.object});
  std::stable_sort(out.begin(), out.end(), [](const CausalPair& x, const CausalPair& y) { return x.frame < y.frame; });
  return out;
}

bool GroundTruthInteractions::holds(std::size_t frame, const std::string& src, const std::string& dst) const {
  for (const auto& a : attachments)
    if (a.human == src && a.object == dst && frame >= a.first && frame < a.last) return true;
  return false;
}

std::pair<SceneSequence, GroundTruthInteractions> generate(const ScenarioSpec& spec, const Vocabulary& vocabulary) {
  spec.validate(vocabulary);
  return Builder(spec, vocabulary).run();
}

void write_ground_truth_csv(std::ostream& out, const GroundTruthInteractions& truth) {
  out << "frame,src,dst\n";
  for (const auto& p : truth.pairs()) out << p.frame << ',' << p.src << ',' << p.dst << '\n';
}

std::vector<CausalPair> read_ground_truth_csv(std::istream& in) {
  std::vector<CausalPair> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 || line.empty()) continue;
    std::istringstream fields(line);
    std::string frame, src, dst;
    if (!std::getline(fields, frame, ',') || !std::getline(fields, src, ',') || !std::getline(fields, dst)) {
      throw SchemaError(number, "ground-truth record needs frame,src,dst");
    }
    try {
      out.push_back({std::stoul(frame), src, dst});
    } catch (const std::exception&) {
      throw SchemaError(number, "unparseable frame index");
    }
  }
  return out;
}

}  // namespace ctxmotion::synthetic
