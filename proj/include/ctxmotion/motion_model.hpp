#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxmotion/context_graph.hpp"
#include "ctxmotion/layers.hpp"
#include "ctxmotion/scene.hpp"
#include "ctxmotion/tensor.hpp"

namespace ctxmotion {

enum class Variant { ZeroVelocity, Rnn, CRnn, CRnnLi, CRnnOmp, CRnnOmpLi };

/// Table row order: ZV, RNN, C-RNN, C-RNN+OMP, C-RNN+LI, C-RNN+OMP+LI.
const std::vector<Variant>& table_variants();
/// Command-line spelling: zv, rnn, crnn, crnn-li, crnn-omp, crnn-omp-li.
std::string variant_flag(Variant v);
std::string variant_label(Variant v);
/// Throws ValidationError for unknown spellings.
Variant parse_variant(const std::string& flag);

struct ModelConfig {
  bool context_enabled = true;
  bool learn_interactions = false;
  bool object_motion = false;
  std::size_t human_hidden = 1024;
  std::size_t context_hidden = 256;
  std::size_t interaction_hidden = 128;
  std::size_t observed = 10;
  std::size_t predicted = 20;
  /// Multiplier applied to coordinates entering the networks; predicted
  /// velocities are divided by it. 1.0 keeps millimetres throughout.
  double input_scale = 1.0;
  Vocabulary vocabulary = Vocabulary::standard();

  /// Throws ValidationError for ZeroVelocity, which has no parameters.
  static ModelConfig for_variant(Variant v);
  Variant variant() const;
  std::size_t feature_width() const { return node_feature_width(vocabulary.size()); }
  /// LI and OMP both need the context branch; widths and lengths must be positive.
  void validate() const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

/// Exact trainable scalar count for a configuration.
std::size_t count_parameters(const ModelConfig& config);

struct PredictionBundle {
  std::vector<std::string> entity_ids;
  std::vector<std::size_t> human_slots;
  std::vector<std::vector<Skeleton>> poses;     // [step][human]
  std::vector<std::vector<BoundingBox>> boxes;  // [step][entity]; empty without object prediction
  std::vector<std::vector<double>> interactions;  // N x N row-major per context frame
  std::size_t entity_count() const { return entity_ids.size(); }
  bool has_boxes() const { return !boxes.empty(); }
};

/// Repeats the last observed frame for every predicted step (poses and boxes).
PredictionBundle zero_velocity_baseline(const Window& window, std::size_t predicted = 20);

/// Differentiable outputs for one window.
struct ForwardTrace {
  std::vector<ad::Tensor> poses;       // per step: humans x 54, mm
  std::vector<ad::Tensor> velocities;  // per step: decode head output in mm
  std::vector<ad::Tensor> boxes;       // per step: entities x 6, mm (object prediction only)
  std::vector<ad::Tensor> adjacency;   // per context frame
};

class MotionModel {
 public:
  MotionModel(ModelConfig config, ParameterStore params);
  static MotionModel initialize(const ModelConfig& config, std::uint64_t seed);
  /// Parameter blocks with the layout `config` needs, all zero.
  static ParameterStore zero_parameters(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const ParameterStore& parameters() const { return params_; }
  ParameterStore& parameters() { return params_; }

  /// Batched forward over windows; humans of all windows share one
  /// human-branch matrix, context branches run per window.
  std::vector<ForwardTrace> forward(ad::Tape& tape, std::span<const Window* const> windows) const;
  ForwardTrace forward(ad::Tape& tape, const Window& window) const;

  PredictionBundle predict(const Window& window) const;
  std::vector<PredictionBundle> predict(std::span<const Window* const> windows) const;

  /// One residual step of the human branch: the GRU reads the previous pose,
  /// the head reads [hidden ; context] (or hidden alone) and emits a velocity.
  struct HumanStep {
    ad::Tensor pose;
    ad::Tensor hidden;
    ad::Tensor velocity;
  };
  HumanStep human_step(ad::Tape& tape, const ad::Tensor& prev_pose, const ad::Tensor& hidden,
                       const ad::Tensor* context) const;
  /// Residual box update from context hidden rows. Throws ContractError
  /// without object prediction.
  ad::Tensor object_step(ad::Tape& tape, const ad::Tensor& node_hidden, const ad::Tensor& prev_boxes) const;

 private:
  MotionModel() = default;
  void bind();
  PredictionBundle to_bundle(const Window& window, const ForwardTrace& trace) const;

  ModelConfig config_;
  ParameterStore params_;
  GruParams human_gru_;
  LinearParams human_head_;
  std::optional<graph::ContextParams> context_;
  LinearParams object_head_;
};

}  // namespace ctxmotion
