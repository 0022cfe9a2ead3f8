#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ctxmotion/layers.hpp"
#include "ctxmotion/scene.hpp"
#include "ctxmotion/tensor.hpp"

namespace ctxmotion::graph {

inline constexpr double kInteractionRadiusMm = 1000.0;

/// Pairwise scorer g: [H_i ; H_i - H_j] -> relu(. first) -> . second -> one logit.
/// Both maps are bias-free.
struct InteractionHead {
  ad::Tensor first;   // 2H x C
  ad::Tensor second;  // C x 1
};

struct ContextParams {
  ad::Tensor edge_weights;  // 2F x H, bias-free
  GruParams gru;
  std::optional<InteractionHead> head;
  ad::Activation edge_activation = ad::Activation::Relu;

  static ContextParams create(ParameterStore& store, std::size_t feature_width, std::size_t hidden,
                              std::optional<std::size_t> interaction_width, Rng& rng);
  static ContextParams bind(const ParameterStore& store, bool learned);
  std::size_t hidden_width() const { return gru.hidden_width(); }
};

enum class AdjacencyMode { Heuristic, Learned };

/// Binary "closer than 1 m, or self" matrix, row-normalized.
ad::Tensor heuristic_adjacency(std::span<const Vec3> centers,
                               double radius_mm = kInteractionRadiusMm);
/// Logits A_ij = g(H_i, H_i - H_j) for every ordered pair, diagonal included.
ad::Tensor predict_interactions(ad::Tape& tape, const ad::Tensor& hidden, const InteractionHead& head);
/// Row-wise softmax over all N entries.
ad::Tensor normalize_interactions(ad::Tape& tape, const ad::Tensor& logits);
/// R_i = act( sum_j A_ij [x_i ; x_i - x_j] W ). With rows of A summing to one
/// this equals act([X ; X - A X] W), which is how it is evaluated.
ad::Tensor edge_convolution(ad::Tape& tape, const ad::Tensor& features, const ad::Tensor& adjacency,
                            const ad::Tensor& weights, ad::Activation activation);
ad::Tensor context_rnn_step(ad::Tape& tape, const ad::Tensor& edge_features, const ad::Tensor& hidden,
                            const GruParams& gru);

/// Node features as a tensor, coordinates multiplied by `coordinate_scale`.
ad::Tensor feature_tensor(const Frame& frame, const Vocabulary& vocabulary, double coordinate_scale);
std::vector<Vec3> entity_centers(const Frame& frame);

/// Running state of the context branch for one scene.
struct ContextState {
  ad::Tensor hidden;        // N x H
  std::size_t frames = 0;   // frames consumed so far
};

ContextState initial_context(std::size_t entities, std::size_t hidden_width);

/// Consumes one frame: picks the adjacency (identity on the first learned
/// frame, softmax(g(H)) afterwards, or the distance rule), then
/// H <- GRU(EC(X, A), H). Returns the adjacency used.
ad::Tensor context_frame_step(ad::Tape& tape, const ad::Tensor& features,
                              std::span<const Vec3> centers, ContextState& state,
                              const ContextParams& params, AdjacencyMode mode);

struct ContextObservation {
  ContextState state;
  std::vector<ad::Tensor> adjacency;  // one per consumed frame
};

/// Runs the context branch over observed frames starting from zero hidden state.
/// Throws ContractError if the roster changes between frames.
ContextObservation context_observe(ad::Tape& tape, std::span<const Frame> frames,
                                   const Vocabulary& vocabulary, const ContextParams& params,
                                   AdjacencyMode mode, double coordinate_scale = 1.0);

}  // namespace ctxmotion::graph
