#pragma once

// Independent references for the unit and acceptance tests: central finite
// differences, a pairwise double loop for the edge convolution, and a
// scalar GRU. None of these touch the tape.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ctxmotion/layers.hpp"
#include "ctxmotion/motion_model.hpp"
#include "ctxmotion/random.hpp"
#include "ctxmotion/scene.hpp"
#include "ctxmotion/tensor.hpp"

namespace oracle {

using ctxmotion::ad::Tensor;

// Central difference of f with respect to entry i of t (t is perturbed in place
// and restored).
inline double central_difference(const std::function<double()>& f, Tensor& t, std::size_t i,
                                 double step = 1e-5) {
  auto v = t.mutable_data();
  const double saved = v[i];
  v[i] = saved + step;
  const double plus = f();
  v[i] = saved - step;
  const double minus = f();
  v[i] = saved;
  return (plus - minus) / (2.0 * step);
}

// |a - b| / max(|a|, |b|, floor). The floor keeps entries that are zero up to
// rounding from dominating; it sits far below the gradients being checked.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct GradCheck {
  double max_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// Compares analytic gradients (already in the tensors) against central
// differences of `loss` for the given entries.
inline void check_entries(GradCheck& out, const std::string& name, Tensor& t, const std::vector<double>& analytic,
                          const std::vector<std::size_t>& entries, const std::function<double()>& loss,
                          double step = 1e-5) {
  for (std::size_t i : entries) {
    const double fd = central_difference(loss, t, i, step);
    const double err = relative_error(analytic[i], fd);
    ++out.checked;
    if (err > out.max_error) {
      out.max_error = err;
      out.worst = name + "[" + std::to_string(i) + "] ad=" + std::to_string(analytic[i]) +
                  " fd=" + std::to_string(fd);
    }
  }
}

// R_i = act( sum_j A_ij ([x_i ; x_i - x_j] W) ), straight from the pairwise rule.
inline std::vector<double> edge_convolution(const std::vector<double>& x, std::size_t n, std::size_t f,
                                            const std::vector<double>& a, const std::vector<double>& w,
                                            std::size_t out, bool relu) {
  std::vector<double> r(n * out, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> pair(2 * f);
      for (std::size_t k = 0; k < f; ++k) {
        pair[k] = x[i * f + k];
        pair[f + k] = x[i * f + k] - x[j * f + k];
      }
      for (std::size_t c = 0; c < out; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < 2 * f; ++k) s += pair[k] * w[k * out + c];
        r[i * out + c] += a[i * n + j] * s;
      }
    }
  }
  if (relu)
    for (double& v : r) v = std::max(0.0, v);
  return r;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// One GRU step for one row, gate order (reset, update, candidate).
inline std::vector<double> gru_row(const std::vector<double>& x, const std::vector<double>& h,
                                   const ctxmotion::GruParams& p) {
  const std::size_t in = x.size(), hw = h.size();
  const auto wi = p.input_weights.data(), wh = p.hidden_weights.data();
  const auto bi = p.input_bias.data(), bh = p.hidden_bias.data();
  auto gi = [&](std::size_t c) {
    double s = bi[c];
    for (std::size_t k = 0; k < in; ++k) s += x[k] * wi[k * 3 * hw + c];
    return s;
  };
  auto gh = [&](std::size_t c) {
    double s = bh[c];
    for (std::size_t k = 0; k < hw; ++k) s += h[k] * wh[k * 3 * hw + c];
    return s;
  };
  std::vector<double> out(hw);
  for (std::size_t c = 0; c < hw; ++c) {
    const double r = sigmoid(gi(c) + gh(c));
    const double z = sigmoid(gi(hw + c) + gh(hw + c));
    const double n = std::tanh(gi(2 * hw + c) + r * gh(2 * hw + c));
    out[c] = (1.0 - z) * n + z * h[c];
  }
  return out;
}

inline std::vector<double> random_values(ctxmotion::Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// ZV error by hand: mean joint distance between the last observed and the
// true future pose, averaged over humans then windows.
inline double zero_velocity_error(const std::vector<ctxmotion::Window>& windows, std::size_t horizon) {
  double total = 0.0;
  for (const auto& w : windows) {
    const auto& last = w.observed.back();
    const auto& fut = w.future[horizon - 1];
    double s = 0.0;
    std::size_t count = 0;
    for (std::size_t e = 0; e < last.entities.size(); ++e) {
      if (!last.entities[e].skeleton) continue;
      for (std::size_t j = 0; j < ctxmotion::kJointCount; ++j) {
        const auto& p = last.entities[e].skeleton->joints[j];
        const auto& q = fut.entities[e].skeleton->joints[j];
        s += std::hypot(p[0] - q[0], p[1] - q[1], p[2] - q[2]);
        ++count;
      }
    }
    total += s / static_cast<double>(count);
  }
  return total / static_cast<double>(windows.size());
}

// A scene with one human walking at a constant velocity (all joints moving
// together) and one static box. Joints sit at small integer offsets so every
// coordinate is exactly representable.
inline ctxmotion::SceneSequence uniform_motion_scene(std::size_t frames, double step_x) {
  using namespace ctxmotion;
  SceneSequence seq;
  seq.vocabulary = Vocabulary::standard();
  for (std::size_t f = 0; f < frames; ++f) {
    Frame frame;
    frame.t_index = static_cast<std::int64_t>(f);
    EntityObservation h;
    h.id = "human_0";
    h.type = seq.vocabulary.index_of("human");
    Skeleton s;
    for (std::size_t j = 0; j < kJointCount; ++j)
      s.joints[j] = {100.0 + step_x * static_cast<double>(f), 10.0 * static_cast<double>(j), 1000.0 + 50.0 * static_cast<double>(j)};
    h.skeleton = s;
    h.box = BoundingBox::around(s);
    EntityObservation b;
    b.id = "box_0";
    b.type = seq.vocabulary.index_of("box");
    b.box = {{2000, 0, 0}, {2300, 200, 200}};
    frame.entities = {h, b};
    seq.frames.push_back(frame);
  }
  return seq;
}

}  // namespace oracle
