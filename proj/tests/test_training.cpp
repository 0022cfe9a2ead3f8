#include <doctest.h>

#include <cmath>
#include <limits>

#include "ctxmotion/checkpoint.hpp"
#include "ctxmotion/errors.hpp"
#include "ctxmotion/evaluation.hpp"
#include "ctxmotion/training.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace ctxmotion;
using ad::Tensor;

namespace {

// A trace that reproduces the window's future exactly.
ForwardTrace perfect_trace(const Window& w, bool boxes) {
  ForwardTrace trace;
  const auto slots = w.human_slots();
  for (const auto& f : w.future) {
    std::vector<double> pose;
    for (auto s : slots) {
      const auto flat = f.entities[s].skeleton->flat();
      pose.insert(pose.end(), flat.begin(), flat.end());
    }
    trace.poses.push_back(Tensor::from({slots.size(), 54}, pose, true));
    if (boxes) {
      std::vector<double> b;
      for (const auto& e : f.entities) {
        const auto flat = e.box.flat();
        b.insert(b.end(), flat.begin(), flat.end());
      }
      trace.boxes.push_back(Tensor::from({f.entities.size(), 6}, b, true));
    }
  }
  return trace;
}

std::vector<Window> tiny_windows(std::size_t count, std::uint64_t seed) {
  std::vector<Window> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(fixture::toy_window(seed + k, 3, 4, 2, 10 + k));
  return out;
}

}  // namespace

TEST_CASE("window loss") {
  const auto w = fixture::toy_window(1, 3, 4, 3);
  auto trace = perfect_trace(w, true);
  {
    ad::Tape tape;
    CHECK(window_loss(tape, trace, w, true).item() == 0.0);
  }
  SUBCASE("3-4-5 residual over two steps") {
    trace.poses[0].mutable_data()[7] += 3.0;
    trace.poses[3].mutable_data()[40] -= 4.0;
    ad::Tape tape;
    CHECK(window_loss(tape, trace, w, false).item() == doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("object residuals join the same norm; human boxes are ignored") {
    trace.poses[1].mutable_data()[0] += 5.0;
    trace.boxes[2].mutable_data()[0] += 100.0;  // human's box
    trace.boxes[2].mutable_data()[6 + 4] += 12.0;
    ad::Tape tape;
    CHECK(window_loss(tape, trace, w, true).item() == doctest::Approx(13.0).epsilon(1e-12));
    ad::Tape tape2;
    CHECK(window_loss(tape2, trace, w, false).item() == doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("gradient is the unit residual") {
    trace.poses[0].mutable_data()[2] += 3.0;
    trace.poses[1].mutable_data()[5] += 4.0;
    ad::Tape tape;
    const auto loss = window_loss(tape, trace, w, false);
    tape.backward(loss);
    const auto g0 = trace.poses[0].grad(), g1 = trace.poses[1].grad();
    CHECK(g0[2] == doctest::Approx(0.6));
    CHECK(g1[5] == doctest::Approx(0.8));
    CHECK(g0[3] == 0.0);
  }
}

TEST_CASE("adam update") {
  ParameterStore store;
  auto& p = store.add("p", {1, 3});
  auto data = p.mutable_data();
  data[0] = 1.0;
  data[1] = -2.0;
  data[2] = 0.5;
  Adam adam(store);
  auto g = store.at("p").mutable_grad();
  g[0] = 0.3;
  g[1] = -7.0;
  g[2] = 0.0;
  adam.step(store);
  const auto after = store.at("p").data();
  // Step one moves each coordinate by about lr against the gradient sign.
  CHECK(after[0] == doctest::Approx(1.0 - 5e-4).epsilon(1e-9));
  CHECK(after[1] == doctest::Approx(-2.0 + 5e-4).epsilon(1e-9));
  CHECK(after[2] == 0.5);
  CHECK(adam.first_moments()[0][0] == doctest::Approx(0.15));
  CHECK(adam.second_moments()[0][1] == doctest::Approx(0.01 * 49.0));

  // A zero gradient lets the moments decay and still moves the parameter.
  store.zero_grad();
  adam.step(store);
  CHECK(adam.first_moments()[0][0] == doctest::Approx(0.5 * 0.15));
  CHECK(adam.second_moments()[0][0] == doctest::Approx(0.99 * 0.01 * 0.09));
  CHECK(store.at("p").data()[0] < 1.0 - 5e-4);
  CHECK(adam.steps() == 2);
}

TEST_CASE("adam rejects non-finite gradients without updating") {
  ParameterStore store;
  store.add("a", {1, 2});
  store.add("b", {2, 1});
  const auto before = store.clone();
  Adam adam(store);
  store.at("a").mutable_grad()[0] = 1.0;
  store.at("b").mutable_grad()[1] = std::numeric_limits<double>::quiet_NaN();
  try {
    adam.step(store);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  CHECK(adam.steps() == 0);
  CHECK(store.at("a").data()[0] == before.at("a").data()[0]);
}

TEST_CASE("gradient clipping") {
  ParameterStore store;
  store.add("a", {1, 2});
  store.add("b", {1, 1});
  store.at("a").mutable_grad()[0] = 6.0;
  store.at("b").mutable_grad()[0] = 8.0;
  CHECK(gradient_norm(store) == doctest::Approx(10.0));
  CHECK(clip_gradients(store, 5.0) == doctest::Approx(10.0));
  CHECK(gradient_norm(store) == doctest::Approx(5.0));
  CHECK(store.at("a").grad_data()[0] == doctest::Approx(3.0));
  CHECK(clip_gradients(store, 5.0) == doctest::Approx(5.0));
  CHECK(store.at("b").grad_data()[0] == doctest::Approx(4.0));
}

TEST_CASE("training is reproducible and logs") {
  const auto windows = tiny_windows(5, 30);
  const auto config = fixture::reduced_config(Variant::CRnnOmpLi);
  TrainOptions opt;
  opt.seed = 77;
  opt.max_steps = 6;
  opt.batch_size = 2;
  std::vector<std::string> lines;
  opt.log = [&](const std::string& s) { lines.push_back(s); };
  const auto a = train(windows, {}, config, opt);
  opt.log = nullptr;
  const auto b = train(windows, {}, config, opt);
  CHECK(a.report.losses.size() == 6);
  CHECK(a.report.losses == b.report.losses);
  CHECK(serialize_checkpoint(a.model) == serialize_checkpoint(b.model));
  CHECK(a.report.epochs.size() == 3);  // 5 windows, batch 2: two steps per epoch
  CHECK_FALSE(lines.empty());
  std::size_t clip_lines = 0;
  for (const auto& l : lines) clip_lines += l.find("clipped") != std::string::npos;
  CHECK(clip_lines == a.report.clipped_steps);

  opt.seed = 78;
  CHECK(train(windows, {}, config, opt).report.losses != a.report.losses);
}

TEST_CASE("small batches shrink to the window count") {
  const auto windows = tiny_windows(3, 40);
  TrainOptions opt;
  opt.max_steps = 2;
  std::string note;
  opt.log = [&](const std::string& s) {
    if (note.empty()) note = s;
  };
  const auto r = train(windows, {}, fixture::reduced_config(Variant::Rnn), opt);
  CHECK(r.report.losses.size() == 2);
  CHECK(note.find("batch size reduced to 3") != std::string::npos);
}

TEST_CASE("zero steps return the initialization") {
  const auto config = fixture::reduced_config(Variant::CRnn);
  TrainOptions opt;
  opt.seed = 5;
  opt.max_steps = 0;
  const auto r = train({}, {}, config, opt);
  CHECK(serialize_checkpoint(r.model) == serialize_checkpoint(MotionModel::initialize(config, 5)));
  CHECK(r.report.losses.empty());
  opt.max_steps = 1;
  CHECK_THROWS_AS(train({}, {}, config, opt), DataError);
}

TEST_CASE("early stopping restores the best epoch") {
  const auto windows = tiny_windows(4, 50);
  const auto validation = tiny_windows(2, 60);
  TrainOptions opt;
  opt.seed = 9;
  opt.max_steps = 400;
  opt.batch_size = 4;
  opt.patience = 2;
  opt.adam.learning_rate = 0.05;  // large enough to overshoot quickly
  const auto config = fixture::reduced_config(Variant::CRnnLi);
  const auto r = train(windows, validation, config, opt);
  REQUIRE_FALSE(r.report.epochs.empty());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : r.report.epochs) best = std::min(best, e.validation_error);
  CHECK(r.report.best_validation_error == best);
  CHECK(eval::validation_error(r.model, validation) == doctest::Approx(best).epsilon(1e-12));
  if (r.report.early_stopped) CHECK(r.report.epochs.size() == r.report.best_epoch + opt.patience);
}

TEST_CASE("a few steps reduce the loss on a fixed batch") {
  const auto windows = tiny_windows(2, 70);
  TrainOptions opt;
  opt.max_steps = 60;
  opt.augment = false;
  opt.adam.learning_rate = 1e-2;
  const auto r = train(windows, {}, fixture::reduced_config(Variant::CRnnOmp), opt);
  CHECK(r.report.losses.back() < r.report.losses.front());
}
