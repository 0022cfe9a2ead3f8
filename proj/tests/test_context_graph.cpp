#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ctxmotion/context_graph.hpp"
#include "ctxmotion/errors.hpp"
#include "ctxmotion/synthetic.hpp"
#include "oracles.hpp"

using namespace ctxmotion;
using ad::Tensor;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Random small context parameters with nonzero GRU biases.
graph::ContextParams random_params(ParameterStore& store, std::size_t f, std::size_t h, std::size_t c, Rng& rng) {
  auto p = graph::ContextParams::create(store, f, h, c, rng);
  for (const char* b : {"context.gru.input_bias", "context.gru.hidden_bias"})
    for (double& v : store.at(b).mutable_data()) v = rng.uniform(-0.3, 0.3);
  return p;
}

Tensor permute_rows(const Tensor& t, const std::vector<std::size_t>& perm) {
  ad::Tape tape(false);
  return tape.gather_rows(t, perm);
}

// P A P^T for a permutation of entities.
std::vector<double> permute_square(const Tensor& a, const std::vector<std::size_t>& perm) {
  const std::size_t n = perm.size();
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.at(perm[i], perm[j]);
  return out;
}

}  // namespace

TEST_CASE("heuristic adjacency") {
  const std::vector<Vec3> near{{0, 0, 0}, {500, 0, 0}};
  CHECK(values(graph::heuristic_adjacency(near)) == std::vector<double>{0.5, 0.5, 0.5, 0.5});
  const std::vector<Vec3> far{{0, 0, 0}, {2000, 0, 0}};
  CHECK(values(graph::heuristic_adjacency(far)) == std::vector<double>{1, 0, 0, 1});
  const std::vector<Vec3> one{{3, 4, 5}};
  CHECK(values(graph::heuristic_adjacency(one)) == std::vector<double>{1.0});
  const std::vector<Vec3> edge{{0, 0, 0}, {1000, 0, 0}};
  CHECK(values(graph::heuristic_adjacency(edge)) == std::vector<double>{1, 0, 0, 1});
}

TEST_CASE("interaction prediction and normalization") {
  ParameterStore store;
  Rng rng(31);
  auto p = random_params(store, 4, 3, 5, rng);
  ad::Tape tape;

  const auto same = Tensor::from({3, 3}, {1, 2, 3, 1, 2, 3, 1, 2, 3});
  const auto uniform = graph::normalize_interactions(tape, graph::predict_interactions(tape, same, *p.head));
  for (double v : uniform.data()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));

  const auto h = Tensor::from({3, 3}, oracle::random_values(rng, 9));
  const auto logits = graph::predict_interactions(tape, h, *p.head);
  CHECK(logits.shape() == ad::Shape{3, 3});
  CHECK(logits.at(0, 1) != logits.at(1, 0));

  ParameterStore zero_store;
  auto zp = graph::ContextParams::create(zero_store, 4, 3, 5, rng);
  zero_store.fill(0.0);
  const auto flat = graph::normalize_interactions(tape, graph::predict_interactions(tape, h, *zp.head));
  for (double v : flat.data()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));

  CHECK(graph::normalize_interactions(tape, Tensor::from({1, 1}, {17.5})).item() == 1.0);
  const auto two = graph::normalize_interactions(tape, Tensor::from({1, 2}, {std::log(3.0), 0}));
  CHECK(two.at(0, 0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(two.at(0, 1) == doctest::Approx(0.25).epsilon(1e-15));
  const auto five = graph::normalize_interactions(tape, Tensor::from({5, 5}, oracle::random_values(rng, 25, -5, 5)));
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 5; ++j) s += five.at(i, j);
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(graph::predict_interactions(tape, Tensor::zeros({3, 4}), *p.head), DimensionError);
}

TEST_CASE("edge convolution") {
  Rng rng(32);
  ad::Tape tape;
  const auto x = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
  // W copies the first F inputs.
  const auto w = Tensor::from({4, 2}, {1, 0, 0, 1, 0, 0, 0, 0});
  CHECK(values(graph::edge_convolution(tape, x, Tensor::identity(3), w, ad::Activation::Relu)) == values(x));

  const auto wr = Tensor::from({4, 3}, oracle::random_values(rng, 12));
  const auto id_out = graph::edge_convolution(tape, x, Tensor::identity(3), wr, ad::Activation::Identity);
  const auto half = tape.matmul(x, tape.slice(wr, 0, 0, 2));
  for (std::size_t i = 0; i < 9; ++i) CHECK(id_out.data()[i] == doctest::Approx(half.data()[i]).epsilon(1e-14));

  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.index(6), f = 1 + rng.index(5), o = 1 + rng.index(4);
    const auto xv = oracle::random_values(rng, n * f);
    const auto wv = oracle::random_values(rng, 2 * f * o);
    const auto a = tape.softmax_rows(Tensor::from({n, n}, oracle::random_values(rng, n * n, -2, 2)));
    const auto av = values(a);
    const auto got = graph::edge_convolution(tape, Tensor::from({n, f}, xv), a, Tensor::from({2 * f, o}, wv),
                                             ad::Activation::Relu);
    const auto ref = oracle::edge_convolution(xv, n, f, av, wv, o, true);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(got.data()[i] - ref[i]) <= 1e-12);
  }
  CHECK_THROWS_AS(graph::edge_convolution(tape, x, Tensor::identity(3), Tensor::zeros({3, 2}), ad::Activation::Relu),
                  DimensionError);
}

TEST_CASE("context GRU step") {
  ParameterStore store;
  Rng rng(33);
  auto p = random_params(store, 2, 4, 3, rng);
  const auto r = Tensor::from({2, 4}, oracle::random_values(rng, 8));
  const auto h = Tensor::from({2, 4}, oracle::random_values(rng, 8));
  ad::Tape tape;
  const auto out = graph::context_rnn_step(tape, r, h, p.gru);
  for (std::size_t row = 0; row < 2; ++row) {
    const auto rv = values(r), hv = values(h);
    const auto ref = oracle::gru_row({rv.begin() + 4 * row, rv.begin() + 4 * row + 4},
                                     {hv.begin() + 4 * row, hv.begin() + 4 * row + 4}, p.gru);
    for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(out.at(row, c) - ref[c]) <= 1e-12);
  }
  const std::vector<std::size_t> perm{1, 0};
  const auto swapped = graph::context_rnn_step(tape, permute_rows(r, perm), permute_rows(h, perm), p.gru);
  CHECK(values(swapped) == values(permute_rows(out, perm)));

  store.fill(0.0);
  const auto halved = graph::context_rnn_step(tape, r, h, p.gru);
  for (std::size_t i = 0; i < 8; ++i) CHECK(halved.data()[i] == 0.5 * h.data()[i]);
}

TEST_CASE("context observation") {
  ParameterStore store;
  Rng rng(34);
  const auto vocab = Vocabulary::standard();
  const std::size_t f = node_feature_width(vocab.size());
  auto p = random_params(store, f, 6, 4, rng);
  const auto [seq, truth] = synthetic::generate({synthetic::ScenarioKind::PickPlace, 30, 5.0, 5, {}});
  const std::span<const Frame> frames(seq.frames.data(), 10);

  ad::Tape tape;
  const auto learned = graph::context_observe(tape, frames, vocab, p, graph::AdjacencyMode::Learned, 1e-3);
  REQUIRE(learned.adjacency.size() == 10);
  CHECK(values(learned.adjacency[0]) == values(Tensor::identity(seq.entity_count())));
  for (const auto& a : learned.adjacency) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) {
        s += a.at(i, j);
        CHECK(a.at(i, j) >= 0.0);
      }
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
  CHECK(learned.state.hidden.shape() == ad::Shape{seq.entity_count(), 6});

  // Single entity: every adjacency is exactly [[1.0]].
  std::vector<Frame> lone(frames.begin(), frames.end());
  for (auto& fr : lone) fr.entities.resize(1);
  for (auto mode : {graph::AdjacencyMode::Learned, graph::AdjacencyMode::Heuristic}) {
    const auto obs = graph::context_observe(tape, lone, vocab, p, mode, 1e-3);
    for (const auto& a : obs.adjacency) CHECK(values(a) == std::vector<double>{1.0});
  }

  // Heuristic series survives augmentation bit for bit.
  const auto heuristic = graph::context_observe(tape, frames, vocab, p, graph::AdjacencyMode::Heuristic, 1e-3);
  Rng aug_rng(35);
  const auto moved = apply_transform(seq, RigidTransform::sample(aug_rng));
  const auto moved_obs = graph::context_observe(tape, std::span<const Frame>(moved.frames.data(), 10), vocab, p,
                                                graph::AdjacencyMode::Heuristic, 1e-3);
  for (std::size_t k = 0; k < 10; ++k) CHECK(values(heuristic.adjacency[k]) == values(moved_obs.adjacency[k]));

  std::vector<Frame> broken(frames.begin(), frames.end());
  broken[4].entities.pop_back();
  CHECK_THROWS_AS(graph::context_observe(tape, broken, vocab, p, graph::AdjacencyMode::Learned), ContractError);
  broken = std::vector<Frame>(frames.begin(), frames.end());
  std::swap(broken[6].entities[1], broken[6].entities[2]);
  CHECK_THROWS_AS(graph::context_observe(tape, broken, vocab, p, graph::AdjacencyMode::Learned), ContractError);
}

TEST_CASE("entity permutation equivariance") {
  ParameterStore store;
  Rng rng(36);
  const auto vocab = Vocabulary::standard();
  auto p = random_params(store, node_feature_width(vocab.size()), 5, 4, rng);
  const auto [seq, truth] = synthetic::generate({synthetic::ScenarioKind::PickPlace, 30, 5.0, 6, {}});
  std::vector<std::size_t> perm(seq.entity_count());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::vector<Frame> frames(seq.frames.begin(), seq.frames.begin() + 6);
  std::vector<Frame> permuted = frames;
  for (auto& fr : permuted) {
    auto copy = fr.entities;
    for (std::size_t i = 0; i < perm.size(); ++i) fr.entities[i] = copy[perm[i]];
  }
  ad::Tape tape;
  const auto a = graph::context_observe(tape, frames, vocab, p, graph::AdjacencyMode::Learned, 1e-3);
  const auto b = graph::context_observe(tape, permuted, vocab, p, graph::AdjacencyMode::Learned, 1e-3);
  const auto ha = values(permute_rows(a.state.hidden, perm));
  const auto hb = values(b.state.hidden);
  for (std::size_t i = 0; i < ha.size(); ++i) CHECK(hb[i] == doctest::Approx(ha[i]).epsilon(1e-12));
  for (std::size_t k = 0; k < a.adjacency.size(); ++k) {
    const auto pa = permute_square(a.adjacency[k], perm);
    const auto pb = values(b.adjacency[k]);
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pb[i] == doctest::Approx(pa[i]).epsilon(1e-12));
  }
}

TEST_CASE("context branch gradients match finite differences") {
  ParameterStore store;
  Rng rng(37);
  const auto vocab = Vocabulary::standard();
  auto p = random_params(store, node_feature_width(vocab.size()), 4, 3, rng);
  const auto [seq, truth] = synthetic::generate({synthetic::ScenarioKind::PickPlace, 30, 5.0, 7, {}});
  std::vector<Frame> frames(seq.frames.begin(), seq.frames.begin() + 3);
  frames[0].entities.resize(3);
  frames[1].entities.resize(3);
  frames[2].entities.resize(3);
  const auto target = Tensor::from({3, 4}, oracle::random_values(rng, 12));
  const auto build = [&](ad::Tape& t) {
    const auto obs = graph::context_observe(t, frames, vocab, p, graph::AdjacencyMode::Learned, 1e-3);
    return t.sum(t.square(t.sub(obs.state.hidden, target)));
  };
  store.zero_grad();
  {
    ad::Tape tape;
    tape.backward(build(tape));
  }
  oracle::GradCheck check;
  for (auto& [name, t] : store) {
    std::vector<std::size_t> entries;
    for (std::size_t i = 0; i < t.size(); i += 1 + t.size() / 40) entries.push_back(i);
    check_entries(check, name, t, t.grad(), entries, [&] {
      ad::Tape tape(false);
      return build(tape).item();
    });
  }
  INFO(check.worst);
  CHECK(check.max_error < 1e-4);
}
