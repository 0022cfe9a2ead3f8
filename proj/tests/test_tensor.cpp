#include <doctest.h>

#include <cmath>
#include <limits>

#include "ctxmotion/errors.hpp"
#include "ctxmotion/tensor.hpp"
#include "oracles.hpp"

using namespace ctxmotion;
using ad::Tensor;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Max relative error of d loss/d t over all entries.
double grad_error(Tensor& t, const std::function<Tensor(ad::Tape&)>& build) {
  t.zero_grad();
  {
    ad::Tape tape;
    tape.backward(build(tape));
  }
  const auto analytic = t.grad();
  const auto loss = [&] {
    ad::Tape tape(false);
    return build(tape).item();
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    worst = std::max(worst, oracle::relative_error(analytic[i], oracle::central_difference(loss, t, i)));
  }
  return worst;
}

}  // namespace

TEST_CASE("matmul values and errors") {
  ad::Tape tape;
  const auto id = Tensor::identity(2);
  const auto m = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK(values(tape.matmul(id, m)) == std::vector<double>{1, 2, 3, 4});
  CHECK(values(tape.matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4}))) == std::vector<double>{11});
  try {
    tape.matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches finite differences") {
  Rng rng(1);
  auto a = Tensor::from({3, 3}, oracle::random_values(rng, 9), true);
  auto b = Tensor::from({3, 3}, oracle::random_values(rng, 9), true);
  CHECK(grad_error(a, [&](ad::Tape& t) { return t.sum(t.matmul(a, b)); }) < 1e-6);
  CHECK(grad_error(b, [&](ad::Tape& t) { return t.sum(t.matmul(a, b)); }) < 1e-6);
}

TEST_CASE("pointwise ops") {
  ad::Tape tape;
  CHECK(tape.sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  auto x = Tensor::scalar(-3.0, true);
  const auto r = tape.relu(x);
  CHECK(r.item() == 0.0);
  tape.backward(r);
  CHECK(x.grad()[0] == 0.0);

  auto t = Tensor::scalar(0.7, true);
  CHECK(grad_error(t, [&](ad::Tape& tp) { return tp.tanh(t); }) < 1e-6);
  auto s = Tensor::from({4}, {-2.0, -0.3, 0.4, 1.7}, true);
  CHECK(grad_error(s, [&](ad::Tape& tp) { return tp.sum(tp.sigmoid(s)); }) < 1e-6);

  Rng rng(2);
  auto a = Tensor::from({2, 3}, oracle::random_values(rng, 6), true);
  auto b = Tensor::from({2, 3}, oracle::random_values(rng, 6), true);
  CHECK(grad_error(a, [&](ad::Tape& tp) { return tp.sum(tp.mul(tp.sub(a, b), tp.add(a, b))); }) < 1e-6);
  CHECK(grad_error(b, [&](ad::Tape& tp) { return tp.sum(tp.mul(tp.sub(a, b), tp.add(a, b))); }) < 1e-6);
  CHECK_THROWS_AS(tape.add(a, Tensor::zeros({3, 2})), DimensionError);
}

TEST_CASE("bias, scale, square and sqrt gradients") {
  Rng rng(3);
  auto x = Tensor::from({3, 2}, oracle::random_values(rng, 6), true);
  auto bias = Tensor::from({2}, {0.5, -0.25}, true);
  CHECK(grad_error(bias, [&](ad::Tape& t) { return t.sum(t.square(t.add_bias(x, bias))); }) < 1e-6);
  CHECK(grad_error(x, [&](ad::Tape& t) { return t.sqrt(t.sum(t.square(t.scale(x, 3.0)))); }) < 1e-6);
}

TEST_CASE("softmax rows") {
  ad::Tape tape;
  auto s = tape.softmax_rows(Tensor::from({3, 3}, {0, 0, 0, std::log(2.0), 0, 0, 1000, 1000, 0}));
  CHECK(s.at(0, 0) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  const auto two = tape.softmax_rows(Tensor::from({1, 2}, {std::log(2.0), 0}));
  CHECK(two.at(0, 0) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(two.at(0, 1) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  const auto big = tape.softmax_rows(Tensor::from({1, 2}, {1000, 1000}));
  CHECK(big.at(0, 0) == 0.5);
  CHECK(big.at(0, 1) == 0.5);
  CHECK_THROWS_AS(tape.softmax_rows(Tensor::from({1, 2}, {std::numeric_limits<double>::quiet_NaN(), 0})),
                  NumericError);
  CHECK_THROWS_AS(tape.softmax_rows(Tensor::from({1, 2}, {std::numeric_limits<double>::infinity(), 0})),
                  NumericError);

  Rng rng(4);
  auto logits = Tensor::from({4, 4}, oracle::random_values(rng, 16, -3, 3), true);
  auto weights = Tensor::from({4, 4}, oracle::random_values(rng, 16));
  CHECK(grad_error(logits, [&](ad::Tape& t) { return t.sum(t.mul(t.softmax_rows(logits), weights)); }) < 1e-6);
}

TEST_CASE("concat and slice") {
  ad::Tape tape;
  auto a = Tensor::from({2}, {1, 2}, true);
  auto b = Tensor::from({1}, {3}, true);
  const auto c = tape.concat({a, b}, 0);
  CHECK(values(c) == std::vector<double>{1, 2, 3});
  CHECK(values(tape.slice(c, 0, 1, 3)) == std::vector<double>{2, 3});
  tape.backward(tape.sum(c));
  CHECK(a.grad() == std::vector<double>{1, 1});
  CHECK(b.grad() == std::vector<double>{1});

  CHECK_THROWS_AS(tape.concat({Tensor::zeros({2, 2}), Tensor::zeros({3, 3})}, 1), DimensionError);
  CHECK_THROWS_AS(tape.concat({Tensor::zeros({2, 2}), Tensor::zeros({2, 2})}, 2), DimensionError);
  CHECK_THROWS_AS(tape.slice(c, 0, 2, 5), DimensionError);

  Rng rng(5);
  auto m = Tensor::from({2, 3}, oracle::random_values(rng, 6), true);
  auto n = Tensor::from({2, 2}, oracle::random_values(rng, 4), true);
  auto w = Tensor::from({2, 5}, oracle::random_values(rng, 10));
  const auto build = [&](ad::Tape& t) {
    return t.sum(t.mul(t.concat({m, n}, 1), w));
  };
  CHECK(grad_error(m, build) < 1e-6);
  CHECK(grad_error(n, build) < 1e-6);
  CHECK(grad_error(m, [&](ad::Tape& t) { return t.sum(t.square(t.slice(m, 1, 1, 3))); }) < 1e-6);
}

TEST_CASE("gather, reshape and column extremes") {
  Rng rng(6);
  auto x = Tensor::from({3, 4}, oracle::random_values(rng, 12), true);
  const std::vector<std::size_t> rows{2, 0, 2};
  CHECK(grad_error(x, [&](ad::Tape& t) { return t.sum(t.square(t.gather_rows(x, rows))); }) < 1e-6);
  CHECK(grad_error(x, [&](ad::Tape& t) { return t.sum(t.square(t.reshape(x, {2, 6}))); }) < 1e-6);
  CHECK(grad_error(x, [&](ad::Tape& t) { return t.sum(t.square(t.max_over_rows(x))); }) < 1e-6);
  CHECK(grad_error(x, [&](ad::Tape& t) { return t.sum(t.square(t.min_over_rows(x))); }) < 1e-6);
  ad::Tape tape;
  const auto m = tape.max_over_rows(Tensor::from({2, 2}, {1, 5, 3, 2}));
  CHECK(values(m) == std::vector<double>{3, 5});
}

TEST_CASE("backward contract and analytic gradients") {
  auto x = Tensor::from({2, 3}, {1, -2, 3, 0.5, 4, -1}, true);
  {
    ad::Tape tape;
    tape.backward(tape.sum(x));
    CHECK(x.grad() == std::vector<double>(6, 1.0));
  }
  x.zero_grad();
  {
    ad::Tape tape;
    tape.backward(tape.scale(tape.sum(tape.square(x)), 0.5));
    CHECK(x.grad() == values(x));
  }
  ad::Tape tape;
  CHECK_THROWS_AS(tape.backward(tape.square(x)), ContractError);
}

TEST_CASE("forward evaluation is bit-identical across runs") {
  Rng rng(7);
  auto a = Tensor::from({5, 7}, oracle::random_values(rng, 35));
  auto b = Tensor::from({7, 3}, oracle::random_values(rng, 21));
  const auto run = [&] {
    ad::Tape tape;
    return values(tape.softmax_rows(tape.tanh(tape.matmul(a, b))));
  };
  CHECK(run() == run());
}
