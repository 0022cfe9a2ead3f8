#include "ctxmotion/context_graph.hpp"

#include <cmath>

#include "ctxmotion/errors.hpp"

namespace ctxmotion::graph {

ContextParams ContextParams::create(ParameterStore& store, std::size_t feature_width,
                                    std::size_t hidden, std::optional<std::size_t> interaction_width,
                                    Rng& rng) {
  store.add_weight("context.edge_weights", 2 * feature_width, hidden, rng);
  GruParams::create(store, "context.gru", hidden, hidden, rng);
  if (interaction_width) {
    store.add_weight("context.interaction.first", 2 * hidden, *interaction_width, rng);
    store.add_weight("context.interaction.second", *interaction_width, 1, rng);
  }
  return bind(store, interaction_width.has_value());
}

ContextParams ContextParams::bind(const ParameterStore& store, bool learned) {
  ContextParams p;
  p.edge_weights = store.at("context.edge_weights");
  p.gru = GruParams::bind(store, "context.gru");
  if (learned) {
    p.head = InteractionHead{store.at("context.interaction.first"),
                             store.at("context.interaction.second")};
  }
  return p;
}

ad::Tensor heuristic_adjacency(std::span<const Vec3> centers, double radius_mm) {
  const std::size_t n = centers.size();
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t linked = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = centers[i][0] - centers[j][0];
      const double dy = centers[i][1] - centers[j][1];
      const double dz = centers[i][2] - centers[j][2];
      if (i == j || std::sqrt(dx * dx + dy * dy + dz * dz) < radius_mm) {
        a[i * n + j] = 1.0;
        ++linked;
      }
    }
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] /= static_cast<double>(linked);
  }
  return ad::Tensor::from({n, n}, std::move(a));
}

ad::Tensor predict_interactions(ad::Tape& tape, const ad::Tensor& hidden, const InteractionHead& head) {
  const std::size_t n = hidden.rows();
  if (hidden.rank() != 2 || head.first.rows() != 2 * hidden.cols()) {
    throw DimensionError("predict_interactions: hidden " + ad::to_string(hidden.shape()) +
                         " does not match interaction head input " +
                         std::to_string(head.first.rows()));
  }
  std::vector<std::size_t> self(n * n), other(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      self[i * n + j] = i;
      other[i * n + j] = j;
    }
  }
  const ad::Tensor hi = tape.gather_rows(hidden, self);
  const ad::Tensor hj = tape.gather_rows(hidden, other);
  const ad::Tensor pairs = tape.concat({hi, tape.sub(hi, hj)}, 1);  // N^2 x 2H
  const ad::Tensor mid = tape.relu(tape.matmul(pairs, head.first));
  return tape.reshape(tape.matmul(mid, head.second), {n, n});
}

ad::Tensor normalize_interactions(ad::Tape& tape, const ad::Tensor& logits) {
  return tape.softmax_rows(logits);
}

ad::Tensor edge_convolution(ad::Tape& tape, const ad::Tensor& features, const ad::Tensor& adjacency,
                            const ad::Tensor& weights, ad::Activation activation) {
  const std::size_t n = features.rows();
  if (features.rank() != 2 || adjacency.rank() != 2 || adjacency.rows() != n ||
      adjacency.cols() != n || weights.rank() != 2 || weights.rows() != 2 * features.cols()) {
    throw DimensionError("edge_convolution: features " + ad::to_string(features.shape()) +
                         ", adjacency " + ad::to_string(adjacency.shape()) + ", weights " +
                         ad::to_string(weights.shape()) + " are inconsistent");
  }
  const ad::Tensor local = tape.sub(features, tape.matmul(adjacency, features));
  return tape.activate(tape.matmul(tape.concat({features, local}, 1), weights), activation);
}

ad::Tensor context_rnn_step(ad::Tape& tape, const ad::Tensor& edge_features, const ad::Tensor& hidden,
                            const GruParams& gru) {
  return gru_step(tape, edge_features, hidden, gru);
}

ad::Tensor feature_tensor(const Frame& frame, const Vocabulary& vocabulary, double coordinate_scale) {
  NodeFeatureMatrix x = build_node_features(frame, vocabulary);
  if (coordinate_scale != 1.0) {
    for (std::size_t r = 0; r < x.rows; ++r) {
      double* row = x.values.data() + r * x.width;
      for (std::size_t c = 0; c < kBoxValues; ++c) row[c] *= coordinate_scale;
      for (std::size_t c = kBoxValues + vocabulary.size(); c < x.width; ++c) row[c] *= coordinate_scale;
    }
  }
  return ad::Tensor::from({x.rows, x.width}, std::move(x.values));
}

std::vector<Vec3> entity_centers(const Frame& frame) {
  std::vector<Vec3> centers;
  centers.reserve(frame.entities.size());
  for (const auto& e : frame.entities) centers.push_back(e.center());
  return centers;
}

ContextState initial_context(std::size_t entities, std::size_t hidden_width) {
  return {ad::Tensor::zeros({entities, hidden_width}), 0};
}

ad::Tensor context_frame_step(ad::Tape& tape, const ad::Tensor& features,
                              std::span<const Vec3> centers, ContextState& state,
                              const ContextParams& params, AdjacencyMode mode) {
  const std::size_t n = features.rows();
  if (state.hidden.rows() != n || centers.size() != n) {
    throw ContractError("context step: roster of " + std::to_string(n) +
                        " entities does not match a context bank of " +
                        std::to_string(state.hidden.rows()));
  }
  ad::Tensor adjacency;
  if (mode == AdjacencyMode::Heuristic) {
    adjacency = heuristic_adjacency(centers);
  } else if (state.frames == 0) {
    adjacency = ad::Tensor::identity(n);
  } else {
    if (!params.head) throw ContractError("learned adjacency requires an interaction head");
    adjacency = normalize_interactions(tape, predict_interactions(tape, state.hidden, *params.head));
  }
  const ad::Tensor r =
      edge_convolution(tape, features, adjacency, params.edge_weights, params.edge_activation);
  state.hidden = context_rnn_step(tape, r, state.hidden, params.gru);
  ++state.frames;
  return adjacency;
}

ContextObservation context_observe(ad::Tape& tape, std::span<const Frame> frames,
                                   const Vocabulary& vocabulary, const ContextParams& params,
                                   AdjacencyMode mode, double coordinate_scale) {
  if (frames.empty()) throw ContractError("context_observe: no frames");
  ContextObservation obs{initial_context(frames.front().entities.size(), params.hidden_width()), {}};
  for (const Frame& frame : frames) {
    if (frame.entities.size() != frames.front().entities.size()) {
      throw ContractError("context_observe: roster changed at frame " + std::to_string(frame.t_index));
    }
    for (std::size_t i = 0; i < frame.entities.size(); ++i) {
      if (frame.entities[i].id != frames.front().entities[i].id) {
        throw ContractError("context_observe: roster changed at frame " +
                            std::to_string(frame.t_index));
      }
    }
    const auto centers = entity_centers(frame);
    obs.adjacency.push_back(context_frame_step(tape, feature_tensor(frame, vocabulary, coordinate_scale),
                                               centers, obs.state, params, mode));
  }
  return obs;
}

}  // namespace ctxmotion::graph
