#include "ctxmotion/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "ctxmotion/errors.hpp"
#include "ctxmotion/evaluation.hpp"
#include "ctxmotion/random.hpp"

namespace ctxmotion {

ad::Tensor window_loss(ad::Tape& tape, const ForwardTrace& trace, const Window& truth,
                       bool include_objects) {
  if (trace.poses.size() > truth.future.size()) {
    throw DimensionError("window_loss: " + std::to_string(trace.poses.size()) +
                         " predicted steps but only " + std::to_string(truth.future.size()) + " future frames");
  }
  const auto humans = truth.human_slots();
  std::vector<std::size_t> objects;
  for (std::size_t i = 0; i < truth.entity_count(); ++i)
    if (std::find(humans.begin(), humans.end(), i) == humans.end()) objects.push_back(i);

  ad::Tensor total;
  const auto accumulate = [&](const ad::Tensor& residual) {
    const ad::Tensor s = tape.sum(tape.square(residual));
    total = total.defined() ? tape.add(total, s) : s;
  };
  for (std::size_t s = 0; s < trace.poses.size(); ++s) {
    const Frame& f = truth.future[s];
    if (!humans.empty()) {
      std::vector<double> target;
      target.reserve(humans.size() * kJointValues);
      for (std::size_t slot : humans) {
        const auto flat = f.entities.at(slot).skeleton->flat();
        target.insert(target.end(), flat.begin(), flat.end());
      }
      accumulate(tape.sub(trace.poses[s], ad::Tensor::from({humans.size(), kJointValues}, target)));
    }
    if (include_objects && !trace.boxes.empty() && !objects.empty()) {
      std::vector<double> target;
      for (std::size_t slot : objects) {
        const auto flat = f.entities.at(slot).box.flat();
        target.insert(target.end(), flat.begin(), flat.end());
      }
      const ad::Tensor predicted = tape.gather_rows(trace.boxes[s], objects);
      accumulate(tape.sub(predicted, ad::Tensor::from({objects.size(), kBoxValues}, target)));
    }
  }
  if (!total.defined()) return ad::Tensor::scalar(0.0);
  return tape.sqrt(total);
}

// ---------------------------------------------------------------------------

Adam::Adam(const ParameterStore& params, AdamConfig config) : config_(config) {
  for (const auto& [name, t] : params) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

void Adam::step(ParameterStore& params) {
  if (params.size() != m_.size()) throw ContractError("Adam: parameter store layout changed");
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) continue;
    for (double g : t.grad_data()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter block '" + name + "'");
    }
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  std::size_t b = 0;
  for (auto& [name, t] : params) {
    auto& m = m_[b];
    auto& v = v_[b];
    ++b;
    double* w = t.mutable_data().data();
    const bool has = t.has_grad();
    const std::span<const double> g = t.grad_data();
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double gi = has ? g[i] : 0.0;
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      w[i] -= config_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
    }
  }
}

double gradient_norm(const ParameterStore& params) {
  double sq = 0.0;
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) continue;
    for (double g : t.grad_data()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_gradients(ParameterStore& params, double max_norm) {
  const double norm = gradient_norm(params);
  if (std::isfinite(norm) && norm > max_norm && norm > 0.0) {
    const double k = max_norm / norm;
    for (auto& [name, t] : params) {
      if (!t.has_grad()) continue;
      for (double& g : t.mutable_grad()) g *= k;
    }
  }
  return norm;
}

// ---------------------------------------------------------------------------

void TrainReport::write_loss_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ResourceError("cannot write " + path);
  out.precision(17);
  out << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) out << i + 1 << ',' << losses[i] << '\n';
}

void TrainReport::write_epoch_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ResourceError("cannot write " + path);
  out.precision(17);
  out << "epoch,step,train_loss,validation_error\n";
  for (const auto& e : epochs)
    out << e.epoch << ',' << e.step << ',' << e.train_loss << ',' << e.validation_error << '\n';
}

TrainResult train(std::span<const Window> train_windows, std::span<const Window> validation_windows,
                  const ModelConfig& config, const TrainOptions& options) {
  config.validate();
  if (options.batch_size == 0) throw ContractError("batch size must be positive");
  const auto started = std::chrono::steady_clock::now();

  MotionModel model = MotionModel::initialize(config, options.seed);
  TrainReport report;
  report.seed = options.seed;
  if (options.max_steps == 0) return {std::move(model), std::move(report)};
  if (train_windows.empty()) throw DataError("no training windows");

  const auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };
  Rng rng(options.seed ^ 0x9E3779B97F4A7C15ULL);
  Adam adam(model.parameters(), options.adam);
  const std::size_t batch = std::min(options.batch_size, train_windows.size());
  if (batch < options.batch_size) {
    log("only " + std::to_string(train_windows.size()) + " training windows; batch size reduced to " +
        std::to_string(batch));
  }

  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), 0);
  ParameterStore best = model.parameters().clone();
  double best_error = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t step = 0;
  std::size_t epoch = 0;

  while (step < options.max_steps) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t lo = 0; lo + batch <= order.size() && step < options.max_steps; lo += batch) {
      std::vector<Window> samples;
      samples.reserve(batch);
      for (std::size_t k = lo; k < lo + batch; ++k) {
        const Window& w = train_windows[order[k]];
        samples.push_back(options.augment ? transform_window(w, RigidTransform::sample(rng)) : w);
      }
      std::vector<const Window*> ptrs;
      for (const auto& w : samples) ptrs.push_back(&w);

      ad::Tape tape;
      const auto traces = model.forward(tape, ptrs);
      ad::Tensor loss;
      for (std::size_t k = 0; k < samples.size(); ++k) {
        const ad::Tensor l = window_loss(tape, traces[k], samples[k], config.object_motion);
        loss = loss.defined() ? tape.add(loss, l) : l;
      }
      loss = tape.scale(loss, 1.0 / static_cast<double>(samples.size()));
      const double value = loss.item();
      if (!std::isfinite(value)) throw NumericError("loss is not finite at step " + std::to_string(step + 1));

      model.parameters().zero_grad();
      tape.backward(loss);
      const double norm = clip_gradients(model.parameters(), options.clip_norm);
      if (norm > options.clip_norm) {
        ++report.clipped_steps;
        log("step " + std::to_string(step + 1) + ": gradient norm " + std::to_string(norm) + " clipped to " +
            std::to_string(options.clip_norm));
      }
      adam.step(model.parameters());
      report.losses.push_back(value);
      epoch_loss += value;
      ++epoch_steps;
      ++step;
    }
    ++epoch;

    EpochRecord record;
    record.epoch = epoch;
    record.step = step;
    record.train_loss = epoch_steps ? epoch_loss / static_cast<double>(epoch_steps) : 0.0;
    if (!validation_windows.empty()) {
      record.validation_error = eval::validation_error(model, validation_windows);
      if (!std::isfinite(record.validation_error)) throw NumericError("validation error is not finite");
      if (record.validation_error < best_error) {
        best_error = record.validation_error;
        best = model.parameters().clone();
        report.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    report.epochs.push_back(record);
    log("epoch " + std::to_string(epoch) + " step " + std::to_string(step) + " loss " +
        std::to_string(record.train_loss) +
        (validation_windows.empty() ? std::string() : " val " + std::to_string(record.validation_error)));
    if (!validation_windows.empty() && since_best >= options.patience) {
      report.early_stopped = true;
      log("early stop after epoch " + std::to_string(epoch));
      break;
    }
  }

  if (!validation_windows.empty()) {
    model.parameters().assign(best);
    report.best_validation_error = best_error;
  } else {
    report.best_epoch = epoch;
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(model), std::move(report)};
}

}  // namespace ctxmotion
