#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ctxmotion/layers.hpp"
#include "ctxmotion/motion_model.hpp"
#include "ctxmotion/scene.hpp"
#include "ctxmotion/tensor.hpp"

namespace ctxmotion {

/// Per-window loss: Euclidean norm of all predicted-minus-true human joint
/// coordinates over every predicted step. When the trace carries boxes and
/// `include_objects` is set, non-human box residuals join the same norm with
/// weight 1.
ad::Tensor window_loss(ad::Tape& tape, const ForwardTrace& trace, const Window& truth,
                       bool include_objects);

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.5;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over the blocks of a ParameterStore, in store order.
class Adam {
 public:
  Adam(const ParameterStore& params, AdamConfig config = {});

  /// Applies one update from the accumulated gradients. Throws NumericError
  /// naming the block if any gradient entry is not finite; nothing is
  /// updated in that case.
  void step(ParameterStore& params);

  std::uint64_t steps() const { return steps_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

double gradient_norm(const ParameterStore& params);
/// Rescales all gradients so their global norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_gradients(ParameterStore& params, double max_norm);

struct TrainOptions {
  std::uint64_t seed = 0;
  std::size_t max_steps = 10000;
  std::size_t batch_size = 16;
  std::size_t patience = 10;  // epochs without validation improvement
  double clip_norm = 5.0;
  bool augment = true;
  AdamConfig adam;
  std::function<void(const std::string&)> log;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;  // optimizer steps completed when the epoch ended
  double train_loss = 0.0;
  double validation_error = 0.0;
};

struct TrainReport {
  std::uint64_t seed = 0;
  std::vector<double> losses;  // one per optimizer step
  std::vector<EpochRecord> epochs;
  std::size_t clipped_steps = 0;
  std::size_t best_epoch = 0;
  double best_validation_error = 0.0;
  bool early_stopped = false;
  double seconds = 0.0;

  /// `step,loss`, one row per optimizer step.
  void write_loss_csv(const std::string& path) const;
  void write_epoch_csv(const std::string& path) const;
};

struct TrainResult {
  MotionModel model;
  TrainReport report;
};

/// Trains a freshly initialized model. Each epoch shuffles the training
/// windows and runs full batches (the last partial batch is dropped; with
/// fewer windows than one batch the batch shrinks to the window count).
/// With validation windows the parameters of the best validation epoch are
/// returned; otherwise the final ones.
TrainResult train(std::span<const Window> train_windows, std::span<const Window> validation_windows,
                  const ModelConfig& config, const TrainOptions& options);

}  // namespace ctxmotion
