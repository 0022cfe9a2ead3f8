#include "ctxmotion/motion_model.hpp"

#include <nlohmann/json.hpp>

#include "ctxmotion/errors.hpp"

namespace ctxmotion {

// ---------------------------------------------------------------------------
// Variants and configuration

const std::vector<Variant>& table_variants() {
  static const std::vector<Variant> order = {Variant::ZeroVelocity, Variant::Rnn,    Variant::CRnn,
                                             Variant::CRnnOmp,      Variant::CRnnLi, Variant::CRnnOmpLi};
  return order;
}

std::string variant_flag(Variant v) {
  switch (v) {
    case Variant::ZeroVelocity: return "zv";
    case Variant::Rnn: return "rnn";
    case Variant::CRnn: return "crnn";
    case Variant::CRnnLi: return "crnn-li";
    case Variant::CRnnOmp: return "crnn-omp";
    case Variant::CRnnOmpLi: return "crnn-omp-li";
  }
  return "?";
}

std::string variant_label(Variant v) {
  switch (v) {
    case Variant::ZeroVelocity: return "ZV";
    case Variant::Rnn: return "RNN";
    case Variant::CRnn: return "C-RNN";
    case Variant::CRnnLi: return "C-RNN+LI";
    case Variant::CRnnOmp: return "C-RNN+OMP";
    case Variant::CRnnOmpLi: return "C-RNN+OMP+LI";
  }
  return "?";
}

Variant parse_variant(const std::string& flag) {
  for (Variant v : table_variants())
    if (variant_flag(v) == flag) return v;
  throw ValidationError("unknown variant '" + flag + "' (expected zv, rnn, crnn, crnn-li, crnn-omp, crnn-omp-li)");
}

ModelConfig ModelConfig::for_variant(Variant v) {
  ModelConfig c;
  switch (v) {
    case Variant::ZeroVelocity:
      throw ValidationError("the zero-velocity baseline has no trainable model");
    case Variant::Rnn: c.context_enabled = false; break;
    case Variant::CRnn: break;
    case Variant::CRnnLi: c.learn_interactions = true; break;
    case Variant::CRnnOmp: c.object_motion = true; break;
    case Variant::CRnnOmpLi:
      c.learn_interactions = true;
      c.object_motion = true;
      break;
  }
  return c;
}

Variant ModelConfig::variant() const {
  if (!context_enabled) return Variant::Rnn;
  if (object_motion) return learn_interactions ? Variant::CRnnOmpLi : Variant::CRnnOmp;
  return learn_interactions ? Variant::CRnnLi : Variant::CRnn;
}

void ModelConfig::validate() const {
  if (!context_enabled && (learn_interactions || object_motion)) {
    throw ValidationError("learned interactions and object motion prediction require the context branch");
  }
  if (human_hidden == 0 || context_hidden == 0 || interaction_hidden == 0) {
    throw ValidationError("hidden widths must be positive");
  }
  if (observed < 2 || predicted == 0) {
    throw ValidationError("need at least 2 observed and 1 predicted frame");
  }
  if (!(input_scale > 0.0)) throw ValidationError("input scale must be positive");
  if (vocabulary.size() == 0) throw ValidationError("empty vocabulary");
}

std::string ModelConfig::to_json() const {
  const nlohmann::json j = {{"context_enabled", context_enabled},
                            {"learn_interactions", learn_interactions},
                            {"object_motion", object_motion},
                            {"human_hidden", human_hidden},
                            {"context_hidden", context_hidden},
                            {"interaction_hidden", interaction_hidden},
                            {"observed", observed},
                            {"predicted", predicted},
                            {"input_scale", input_scale},
                            {"vocabulary", vocabulary.names()},
                            {"human_type", vocabulary.human_name()}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelConfig c;
    c.context_enabled = j.at("context_enabled").get<bool>();
    c.learn_interactions = j.at("learn_interactions").get<bool>();
    c.object_motion = j.at("object_motion").get<bool>();
    c.human_hidden = j.at("human_hidden").get<std::size_t>();
    c.context_hidden = j.at("context_hidden").get<std::size_t>();
    c.interaction_hidden = j.at("interaction_hidden").get<std::size_t>();
    c.observed = j.at("observed").get<std::size_t>();
    c.predicted = j.at("predicted").get<std::size_t>();
    c.input_scale = j.at("input_scale").get<double>();
    c.vocabulary = Vocabulary(j.at("vocabulary").get<std::vector<std::string>>(),
                              j.at("human_type").get<std::string>());
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& err) {
    throw VersionError(std::string("unreadable model configuration: ") + err.what());
  }
}

std::size_t count_parameters(const ModelConfig& c) {
  const auto gru = [](std::size_t in, std::size_t h) { return in * 3 * h + h * 3 * h + 6 * h; };
  std::size_t total = gru(kJointValues, c.human_hidden);
  total += (c.human_hidden + (c.context_enabled ? c.context_hidden : 0)) * kJointValues + kJointValues;
  if (c.context_enabled) {
    total += 2 * c.feature_width() * c.context_hidden + gru(c.context_hidden, c.context_hidden);
    if (c.learn_interactions) total += 2 * c.context_hidden * c.interaction_hidden + c.interaction_hidden;
    if (c.object_motion) total += c.context_hidden * kBoxValues + kBoxValues;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Baseline

PredictionBundle zero_velocity_baseline(const Window& window, std::size_t predicted) {
  if (window.observed.empty()) throw ContractError("zero_velocity_baseline: window has no observed frames");
  const Frame& last = window.observed.back();
  PredictionBundle out;
  for (const auto& e : last.entities) out.entity_ids.push_back(e.id);
  out.human_slots = window.human_slots();
  std::vector<Skeleton> poses;
  for (std::size_t slot : out.human_slots) poses.push_back(*last.entities[slot].skeleton);
  std::vector<BoundingBox> boxes;
  for (const auto& e : last.entities) boxes.push_back(e.box);
  out.poses.assign(predicted, poses);
  out.boxes.assign(predicted, boxes);
  return out;
}

// ---------------------------------------------------------------------------
// Model

namespace {

ad::Tensor pose_rows(const Frame& frame, std::span<const std::size_t> slots, double scale) {
  std::vector<double> v;
  v.reserve(slots.size() * kJointValues);
  for (std::size_t slot : slots) {
    const auto flat = frame.entities.at(slot).skeleton->flat();
    for (double x : flat) v.push_back(x * scale);
  }
  return ad::Tensor::from({slots.size(), kJointValues}, std::move(v));
}

ad::Tensor box_rows(const Frame& frame) {
  std::vector<double> v;
  for (const auto& e : frame.entities) {
    const auto flat = e.box.flat();
    v.insert(v.end(), flat.begin(), flat.end());
  }
  return ad::Tensor::from({frame.entities.size(), kBoxValues}, std::move(v));
}

void check_window(const Window& w, const ModelConfig& cfg) {
  if (w.observed.size() != cfg.observed) {
    throw ContractError("window has " + std::to_string(w.observed.size()) +
                        " observed frames, model expects " + std::to_string(cfg.observed));
  }
  const auto& first = w.observed.front().entities;
  for (const Frame& f : w.observed) {
    bool same = f.entities.size() == first.size();
    for (std::size_t i = 0; same && i < first.size(); ++i) same = f.entities[i].id == first[i].id;
    if (!same) throw ContractError("roster mismatch inside window at frame " + std::to_string(f.t_index));
  }
  for (const auto& e : first) {
    if (e.type >= cfg.vocabulary.size()) {
      throw ContractError("entity '" + e.id + "' has a type outside the model vocabulary");
    }
  }
}

}  // namespace

MotionModel::MotionModel(ModelConfig config, ParameterStore params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const ParameterStore expected = zero_parameters(config_);
  if (expected.size() != params_.size()) {
    throw VersionError("parameter blocks do not match the model configuration");
  }
  auto it = params_.begin();
  for (const auto& [name, t] : expected) {
    if (it->first != name || it->second.shape() != t.shape()) {
      throw VersionError("parameter block '" + it->first + "' does not match expected '" + name +
                         "' " + ad::to_string(t.shape()));
    }
    ++it;
  }
  bind();
}

ParameterStore MotionModel::zero_parameters(const ModelConfig& config) {
  ParameterStore store = initialize(config, 0).params_;
  store.fill(0.0);
  return store;
}

MotionModel MotionModel::initialize(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParameterStore store;
  GruParams::create(store, "human.gru", kJointValues, config.human_hidden, rng);
  const std::size_t head_in = config.human_hidden + (config.context_enabled ? config.context_hidden : 0);
  store.add_weight("human.head.weights", head_in, kJointValues, rng);
  store.add_bias("human.head.bias", kJointValues);
  if (config.context_enabled) {
    graph::ContextParams::create(store, config.feature_width(), config.context_hidden,
                                 config.learn_interactions
                                     ? std::optional<std::size_t>(config.interaction_hidden)
                                     : std::nullopt,
                                 rng);
    if (config.object_motion) {
      store.add_weight("object.head.weights", config.context_hidden, kBoxValues, rng);
      store.add_bias("object.head.bias", kBoxValues);
    }
  }
  MotionModel model;
  model.config_ = config;
  model.params_ = std::move(store);
  model.bind();
  return model;
}

void MotionModel::bind() {
  human_gru_ = GruParams::bind(params_, "human.gru");
  human_head_ = {params_.at("human.head.weights"), params_.at("human.head.bias")};
  context_.reset();
  object_head_ = {};
  if (config_.context_enabled) {
    context_ = graph::ContextParams::bind(params_, config_.learn_interactions);
    if (config_.object_motion) {
      object_head_ = {params_.at("object.head.weights"), params_.at("object.head.bias")};
    }
  }
}

MotionModel::HumanStep MotionModel::human_step(ad::Tape& tape, const ad::Tensor& prev_pose,
                                               const ad::Tensor& hidden,
                                               const ad::Tensor* context) const {
  const double scale = config_.input_scale;
  if (prev_pose.rank() != 2 || prev_pose.cols() != kJointValues) {
    throw DimensionError("human_step: pose must be rows of 54 values, got " +
                         ad::to_string(prev_pose.shape()));
  }
  if ((context != nullptr) != config_.context_enabled) {
    throw ContractError("human_step: context vector presence does not match the configuration");
  }
  const ad::Tensor input = scale == 1.0 ? prev_pose : tape.scale(prev_pose, scale);
  HumanStep out;
  out.hidden = gru_step(tape, input, hidden, human_gru_);
  const ad::Tensor features = context ? tape.concat({out.hidden, *context}, 1) : out.hidden;
  if (context && (context->rows() != prev_pose.rows() || context->cols() != config_.context_hidden)) {
    throw DimensionError("human_step: context " + ad::to_string(context->shape()) +
                         " does not fit " + std::to_string(prev_pose.rows()) + " humans of width " +
                         std::to_string(config_.context_hidden));
  }
  const ad::Tensor raw = human_head_.apply(tape, features);
  out.velocity = scale == 1.0 ? raw : tape.scale(raw, 1.0 / scale);
  out.pose = tape.add(prev_pose, out.velocity);
  return out;
}

ad::Tensor MotionModel::object_step(ad::Tape& tape, const ad::Tensor& node_hidden,
                                    const ad::Tensor& prev_boxes) const {
  if (!config_.object_motion) throw ContractError("object_step requires object motion prediction");
  const double scale = config_.input_scale;
  const ad::Tensor raw = object_head_.apply(tape, node_hidden);
  return tape.add(prev_boxes, scale == 1.0 ? raw : tape.scale(raw, 1.0 / scale));
}

std::vector<ForwardTrace> MotionModel::forward(ad::Tape& tape,
                                               std::span<const Window* const> windows) const {
  const ModelConfig& cfg = config_;
  const double scale = cfg.input_scale;
  const auto mode = cfg.learn_interactions ? graph::AdjacencyMode::Learned : graph::AdjacencyMode::Heuristic;
  std::vector<ForwardTrace> traces(windows.size());

  std::vector<std::vector<std::size_t>> slots;
  std::vector<std::size_t> offsets;
  std::size_t humans = 0;
  for (const Window* w : windows) {
    check_window(*w, cfg);
    slots.push_back(w->human_slots());
    offsets.push_back(humans);
    humans += slots.back().size();
  }
  const auto stacked = [&](std::size_t frame, double s) {
    std::vector<double> v;
    v.reserve(humans * kJointValues);
    for (std::size_t b = 0; b < windows.size(); ++b) {
      const ad::Tensor rows = pose_rows(windows[b]->observed[frame], slots[b], s);
      v.insert(v.end(), rows.data().begin(), rows.data().end());
    }
    return ad::Tensor::from({humans, kJointValues}, std::move(v));
  };

  // Context over the observed frames.
  std::vector<graph::ContextState> states;
  if (context_) {
    for (std::size_t b = 0; b < windows.size(); ++b) {
      auto obs = graph::context_observe(tape, windows[b]->observed, cfg.vocabulary, *context_, mode, scale);
      traces[b].adjacency = std::move(obs.adjacency);
      states.push_back(std::move(obs.state));
    }
  }

  // Human encoder over all observed frames but the last; the last one is
  // the first decoder input.
  ad::Tensor hidden = ad::Tensor::zeros({humans, cfg.human_hidden});
  for (std::size_t k = 0; k + 1 < cfg.observed; ++k) {
    hidden = gru_step(tape, stacked(k, scale), hidden, human_gru_);
  }
  ad::Tensor pose = stacked(cfg.observed - 1, 1.0);

  std::vector<ad::Tensor> boxes;
  if (cfg.object_motion) {
    for (const Window* w : windows) boxes.push_back(box_rows(w->observed.back()));
  }

  for (std::size_t step = 0; step < cfg.predicted; ++step) {
    ad::Tensor context;
    if (context_) {
      std::vector<ad::Tensor> parts;
      for (std::size_t b = 0; b < windows.size(); ++b) {
        parts.push_back(tape.gather_rows(states[b].hidden, slots[b]));
      }
      context = tape.concat(parts, 0);
    }
    HumanStep hs = human_step(tape, pose, hidden, context_ ? &context : nullptr);
    hidden = hs.hidden;
    pose = hs.pose;
    for (std::size_t b = 0; b < windows.size(); ++b) {
      const std::size_t lo = offsets[b], hi = lo + slots[b].size();
      traces[b].poses.push_back(tape.slice(pose, 0, lo, hi));
      traces[b].velocities.push_back(tape.slice(hs.velocity, 0, lo, hi));
    }
    if (!cfg.object_motion) continue;

    for (std::size_t b = 0; b < windows.size(); ++b) {
      const Window& w = *windows[b];
      const auto& roster = w.observed.front().entities;
      const ad::Tensor predicted_boxes = object_step(tape, states[b].hidden, boxes[b]);
      const ad::Tensor& poses_b = traces[b].poses.back();
      std::vector<ad::Tensor> box_parts, feature_parts;
      std::vector<Vec3> centers;
      std::size_t human_row = 0;
      for (std::size_t i = 0; i < roster.size(); ++i) {
        const ad::Tensor type = ad::Tensor::from({1, cfg.vocabulary.size()}, cfg.vocabulary.one_hot(roster[i].type));
        if (roster[i].skeleton) {
          const ad::Tensor joints = tape.slice(poses_b, 0, human_row, human_row + 1);
          ++human_row;
          const ad::Tensor grid = tape.reshape(joints, {kJointCount, 3});
          const ad::Tensor box = tape.concat({tape.min_over_rows(grid), tape.max_over_rows(grid)}, 1);
          box_parts.push_back(box);
          feature_parts.push_back(tape.concat({tape.scale(box, scale), type, tape.scale(joints, scale)}, 1));
          centers.push_back(Skeleton::from_flat(joints.data().data()).centroid());
        } else {
          const ad::Tensor box = tape.slice(predicted_boxes, 0, i, i + 1);
          box_parts.push_back(box);
          feature_parts.push_back(
              tape.concat({tape.scale(box, scale), type, ad::Tensor::zeros({1, kJointValues})}, 1));
          centers.push_back(BoundingBox::from_flat(box.data().data()).center());
        }
      }
      boxes[b] = tape.concat(box_parts, 0);
      traces[b].boxes.push_back(boxes[b]);
      if (step + 1 < cfg.predicted) {
        traces[b].adjacency.push_back(graph::context_frame_step(
            tape, tape.concat(feature_parts, 0), centers, states[b], *context_, mode));
      }
    }
  }
  return traces;
}

ForwardTrace MotionModel::forward(ad::Tape& tape, const Window& window) const {
  const Window* one[] = {&window};
  return std::move(forward(tape, one).front());
}

PredictionBundle MotionModel::to_bundle(const Window& window, const ForwardTrace& trace) const {
  PredictionBundle out;
  for (const auto& e : window.observed.front().entities) out.entity_ids.push_back(e.id);
  out.human_slots = window.human_slots();
  for (const ad::Tensor& p : trace.poses) {
    std::vector<Skeleton> step;
    for (std::size_t h = 0; h < p.rows(); ++h) step.push_back(Skeleton::from_flat(p.data().data() + h * kJointValues));
    out.poses.push_back(std::move(step));
  }
  for (const ad::Tensor& b : trace.boxes) {
    std::vector<BoundingBox> step;
    for (std::size_t i = 0; i < b.rows(); ++i) step.push_back(BoundingBox::from_flat(b.data().data() + i * kBoxValues));
    out.boxes.push_back(std::move(step));
  }
  for (const ad::Tensor& a : trace.adjacency) out.interactions.emplace_back(a.data().begin(), a.data().end());
  return out;
}

PredictionBundle MotionModel::predict(const Window& window) const {
  ad::Tape tape(false);
  return to_bundle(window, forward(tape, window));
}

std::vector<PredictionBundle> MotionModel::predict(std::span<const Window* const> windows) const {
  ad::Tape tape(false);
  const auto traces = forward(tape, windows);
  std::vector<PredictionBundle> out;
  for (std::size_t b = 0; b < windows.size(); ++b) out.push_back(to_bundle(*windows[b], traces[b]));
  return out;
}

}  // namespace ctxmotion
