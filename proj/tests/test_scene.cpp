#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "ctxmotion/errors.hpp"
#include "ctxmotion/scene.hpp"
#include "ctxmotion/synthetic.hpp"
#include "oracles.hpp"

using namespace ctxmotion;

namespace {

EntityObservation cup_at(const Vec3& lo, const Vec3& hi) {
  EntityObservation e;
  e.id = "cup_0";
  e.type = Vocabulary::standard().index_of("cup");
  e.box = {lo, hi};
  return e;
}

EntityObservation human_with(const Vec3& p) {
  EntityObservation e;
  e.id = "human_0";
  e.type = 0;
  Skeleton s;
  s.joints.fill(p);
  e.skeleton = s;
  e.box = BoundingBox::around(s);
  return e;
}

double dist(const Vec3& a, const Vec3& b) { return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]); }

}  // namespace

TEST_CASE("node features follow the documented layout") {
  const auto vocab = Vocabulary::standard();
  CHECK(vocab.size() == 15);
  CHECK(vocab.index_of("cup") == 3);
  CHECK(node_feature_width(vocab.size()) == 75);

  Frame f;
  f.entities = {cup_at({0, 0, 0}, {100, 100, 100})};
  const auto x = build_node_features(f, vocab);
  REQUIRE(x.rows == 1);
  REQUIRE(x.width == 75);
  std::vector<double> expected = {0, 0, 0, 100, 100, 100};
  for (std::size_t k = 0; k < 15; ++k) expected.push_back(k == 3 ? 1.0 : 0.0);
  expected.resize(75, 0.0);
  CHECK(x.values == expected);

  f.entities = {human_with({1, 2, 3}), cup_at({0, 0, 0}, {1, 1, 1})};
  const auto y = build_node_features(f, vocab);
  CHECK(y.rows == 2);
  for (std::size_t c = 0; c < 6; ++c) CHECK(y.at(0, c) == (c % 3) + 1.0);
  for (std::size_t j = 0; j < 18; ++j)
    for (std::size_t k = 0; k < 3; ++k) CHECK(y.at(0, 21 + 3 * j + k) == k + 1.0);
  CHECK(y.at(1, 6 + 3) == 1.0);
  for (std::size_t c = 21; c < 75; ++c) CHECK(y.at(1, c) == 0.0);
}

TEST_CASE("node features read back exactly") {
  const auto [seq, truth] = synthetic::generate({synthetic::ScenarioKind::PickPlace, 30, 5.0, 3, {}});
  const auto& frame = seq.frames[7];
  const auto x = build_node_features(frame, seq.vocabulary);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto e = read_node_features(x, r, seq.vocabulary);
    CHECK(e.type == frame.entities[r].type);
    CHECK(e.box.flat() == frame.entities[r].box.flat());
    CHECK(e.skeleton.has_value() == frame.entities[r].skeleton.has_value());
    if (e.skeleton) CHECK(e.skeleton->flat() == frame.entities[r].skeleton->flat());
  }
}

TEST_CASE("one-hot and vocabulary errors") {
  const auto vocab = Vocabulary::standard();
  const auto v = vocab.one_hot(4);
  CHECK(v.size() == 15);
  for (std::size_t k = 0; k < 15; ++k) CHECK(v[k] == (k == 4 ? 1.0 : 0.0));
  CHECK_THROWS_AS(vocab.index_of("unicorn"), VocabularyError);
  Frame f;
  auto e = cup_at({0, 0, 0}, {1, 1, 1});
  e.type = 99;
  f.entities = {e};
  CHECK_THROWS_AS(build_node_features(f, vocab), VocabularyError);
}

TEST_CASE("box vertices") {
  const BoundingBox b{{0, 0, 0}, {1, 2, 3}};
  const auto v = b.vertices();
  std::set<std::array<double, 3>> unique(v.begin(), v.end());
  CHECK(unique.size() == 8);
  CHECK(v[0] == Vec3{0, 0, 0});
  CHECK(v[7] == Vec3{1, 2, 3});
  CHECK(v[1] == Vec3{1, 0, 0});
}

TEST_CASE("resampling to 100 ms") {
  auto raw = oracle::uniform_motion_scene(50, 1.0);
  const auto r = resample_100ms(raw, 100);
  REQUIRE(r.frames.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(r.frames[i].entities[0].skeleton->joints[0][0] == raw.frames[i * 10].entities[0].skeleton->joints[0][0]);
    CHECK(r.frames[i].t_index == static_cast<std::int64_t>(i));
  }
  CHECK(resample_100ms(raw, 10).frames.size() == 50);
  CHECK(resample_100ms(raw, 30).frames.size() == 17);
  CHECK_THROWS_AS(resample_100ms(raw, 25), RateError);
}

TEST_CASE("dataset split sizes and determinism") {
  const auto s10 = split_dataset(10, 3);
  CHECK(s10.train.size() == 6);
  CHECK(s10.validation.size() == 2);
  CHECK(s10.test.size() == 2);
  const auto s5 = split_dataset(5, 3);
  CHECK(s5.train.size() == 3);
  CHECK(s5.validation.size() == 1);
  CHECK(s5.test.size() == 1);
  const auto again = split_dataset(10, 3);
  CHECK(again.train == s10.train);
  CHECK(again.test == s10.test);
  std::set<std::size_t> all(s10.train.begin(), s10.train.end());
  all.insert(s10.validation.begin(), s10.validation.end());
  all.insert(s10.test.begin(), s10.test.end());
  CHECK(all.size() == 10);
  CHECK_THROWS_AS(split_dataset(4, 0), SplitError);
}

TEST_CASE("rigid transforms") {
  const RigidTransform rot{90.0, 0.0, 0.0};
  const auto p = rot.apply(Vec3{1000, 0, 0});
  CHECK(std::abs(p[0]) < 1e-9);
  CHECK(p[1] == doctest::Approx(1000.0));
  CHECK(p[2] == 0.0);
  const RigidTransform shift{0.0, 100.0, -200.0};
  CHECK(shift.apply(Vec3{0, 0, 0}) == Vec3{100, -200, 0});

  Rng rng(21);
  for (int i = 0; i < 1000; ++i) {
    const auto t = RigidTransform::sample(rng);
    CHECK(t.yaw_degrees > -180.0);
    CHECK(t.yaw_degrees <= 180.0);
    CHECK(std::abs(t.tx) < 1500.0);
    CHECK(std::abs(t.ty) < 1500.0);
  }
}

TEST_CASE("augmentation preserves pairwise centre distances") {
  const auto [seq, truth] = synthetic::generate({synthetic::ScenarioKind::PickPlace, 40, 5.0, 9, {}});
  Rng rng(22);
  const auto aug = augment(seq, rng);
  double worst = 0.0;
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    const auto& a = seq.frames[f].entities;
    const auto& b = aug.frames[f].entities;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a.size(); ++j)
        worst = std::max(worst, std::abs(dist(a[i].center(), a[j].center()) - dist(b[i].center(), b[j].center())));
  }
  CHECK(worst < 1e-9);
  // Re-enclosed boxes stay ordered and humans keep their joints.
  for (const auto& f : aug.frames)
    for (const auto& e : f.entities) CHECK(e.box.ordered());
}

TEST_CASE("window extraction") {
  CHECK(window_positions(29).empty());
  CHECK(window_positions(30).size() == 1);
  const auto pos = window_positions(35);
  REQUIRE(pos.size() == 6);
  CHECK(pos[5].t_o == 5);
  CHECK(pos[5].t == 15);
  CHECK(pos[5].t_f == 34);
  CHECK(pos[0].observed() == 10);
  CHECK(pos[0].predicted() == 20);
  const auto seq = oracle::uniform_motion_scene(32, 10.0);
  const auto windows = extract_windows({seq});
  REQUIRE(windows.size() == 3);
  CHECK(windows[2].observed.size() == 10);
  CHECK(windows[2].future.size() == 20);
  CHECK(windows[2].observed.front().t_index == 2);
  CHECK(windows[2].future.front().t_index == 12);
  CHECK(windows[2].human_slots() == std::vector<std::size_t>{0});
}

TEST_CASE("scene files round-trip exactly") {
  const auto [seq, truth] = synthetic::generate({synthetic::ScenarioKind::PassObject, 30, 5.0, 4, {}});
  std::stringstream buf;
  write_scene(buf, seq);
  const auto back = read_scene(buf);
  REQUIRE(back.frames.size() == seq.frames.size());
  CHECK(back.vocabulary == seq.vocabulary);
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    for (std::size_t i = 0; i < seq.entity_count(); ++i) {
      const auto& a = seq.frames[f].entities[i];
      const auto& b = back.frames[f].entities[i];
      CHECK(a.id == b.id);
      CHECK(a.box.flat() == b.box.flat());
      if (a.skeleton) CHECK(a.skeleton->flat() == b.skeleton->flat());
    }
  }
}

TEST_CASE("schema errors carry line numbers") {
  const auto [seq, truth] = synthetic::generate({synthetic::ScenarioKind::StaticClutter, 30, 0.0, 4, {}});
  std::stringstream buf;
  write_scene(buf, seq);
  std::vector<std::string> lines;
  for (std::string l; std::getline(buf, l);) lines.push_back(l);
  const auto parse_with = [&](std::size_t index, const std::string& replacement) {
    auto copy = lines;
    copy[index] = replacement;
    std::stringstream s;
    for (const auto& l : copy) s << l << '\n';
    return read_scene(s);
  };
  try {
    parse_with(3, "{not json");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 4);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  try {
    parse_with(5, R"({"t_index":4,"entities":[]})");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 6);
  }
  std::string bad_type = lines[2];
  bad_type.replace(bad_type.find("\"cup\""), 5, "\"unicorn\"");
  try {
    parse_with(2, bad_type);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 3);
  }
}
