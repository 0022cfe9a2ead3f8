#include "ctxmotion/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ctxmotion/errors.hpp"

namespace ctxmotion::eval {

namespace {

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

double human_error(std::span<const Skeleton> predicted, std::span<const Skeleton> truth) {
  if (predicted.size() != truth.size() || predicted.empty()) {
    throw DimensionError("human_error: " + std::to_string(predicted.size()) +
                         " predicted skeletons vs " + std::to_string(truth.size()) + " true");
  }
  double total = 0.0;
  for (std::size_t h = 0; h < predicted.size(); ++h)
    for (std::size_t j = 0; j < kJointCount; ++j) total += distance(predicted[h].joints[j], truth[h].joints[j]);
  return total / static_cast<double>(predicted.size() * kJointCount);
}

double object_error(std::span<const BoundingBox> predicted, std::span<const BoundingBox> truth) {
  if (predicted.size() != truth.size() || predicted.empty()) {
    throw DimensionError("object_error: " + std::to_string(predicted.size()) +
                         " predicted boxes vs " + std::to_string(truth.size()) + " true");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto p = predicted[i].vertices(), t = truth[i].vertices();
    for (std::size_t v = 0; v < 8; ++v) total += distance(p[v], t[v]);
  }
  return total / static_cast<double>(predicted.size() * 8);
}

double human_error(const PredictionBundle& bundle, const Window& window, std::size_t horizon) {
  if (horizon == 0 || horizon > bundle.poses.size() || horizon > window.future.size()) {
    throw DimensionError("horizon " + std::to_string(horizon) + " outside the predicted range");
  }
  const Frame& truth = window.future[horizon - 1];
  std::vector<Skeleton> expected;
  for (std::size_t slot : bundle.human_slots) {
    if (slot >= truth.entities.size() || !truth.entities[slot].skeleton) {
      throw DimensionError("human_error: ground truth lacks a skeleton for roster slot " + std::to_string(slot));
    }
    expected.push_back(*truth.entities[slot].skeleton);
  }
  return human_error(bundle.poses[horizon - 1], expected);
}

std::optional<double> object_error(const PredictionBundle& bundle, const Window& window,
                                   std::size_t horizon) {
  if (!bundle.has_boxes()) return std::nullopt;
  if (horizon == 0 || horizon > bundle.boxes.size() || horizon > window.future.size()) {
    throw DimensionError("horizon " + std::to_string(horizon) + " outside the predicted range");
  }
  const Frame& truth = window.future[horizon - 1];
  const auto& predicted = bundle.boxes[horizon - 1];
  if (predicted.size() != truth.entities.size()) {
    throw DimensionError("object_error: roster size mismatch");
  }
  std::vector<BoundingBox> p, t;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (truth.entities[i].skeleton) continue;
    p.push_back(predicted[i]);
    t.push_back(truth.entities[i].box);
  }
  if (p.empty()) return std::nullopt;
  return object_error(p, t);
}

HorizonErrors evaluate(std::span<const PredictionBundle> bundles, std::span<const Window> windows) {
  if (bundles.size() != windows.size()) throw DimensionError("evaluate: bundle/window count mismatch");
  HorizonErrors out;
  out.windows = windows.size();
  if (windows.empty()) return out;
  const std::size_t horizons = bundles.front().poses.size();
  out.human.assign(horizons, 0.0);
  std::vector<double> object_sum(horizons, 0.0);
  std::size_t object_windows = 0;
  std::size_t human_windows = 0;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    if (!bundles[w].human_slots.empty()) {
      ++human_windows;
      for (std::size_t h = 1; h <= horizons; ++h) out.human[h - 1] += human_error(bundles[w], windows[w], h);
    }
    if (object_error(bundles[w], windows[w], 1)) {
      ++object_windows;
      for (std::size_t h = 1; h <= horizons; ++h) object_sum[h - 1] += *object_error(bundles[w], windows[w], h);
    }
  }
  for (double& v : out.human) v = human_windows ? v / static_cast<double>(human_windows) : 0.0;
  if (object_windows) {
    out.object = object_sum;
    for (double& v : out.object) v /= static_cast<double>(object_windows);
  }
  return out;
}

HorizonErrors evaluate_model(const MotionModel& model, std::span<const Window> windows, std::size_t batch) {
  std::vector<PredictionBundle> bundles;
  for (std::size_t lo = 0; lo < windows.size(); lo += batch) {
    std::vector<const Window*> ptrs;
    for (std::size_t i = lo; i < std::min(windows.size(), lo + batch); ++i) ptrs.push_back(&windows[i]);
    for (auto& b : model.predict(ptrs)) bundles.push_back(std::move(b));
  }
  return evaluate(bundles, windows);
}

HorizonErrors evaluate_zero_velocity(std::span<const Window> windows, std::size_t predicted) {
  std::vector<PredictionBundle> bundles;
  for (const Window& w : windows) bundles.push_back(zero_velocity_baseline(w, predicted));
  return evaluate(bundles, windows);
}

double validation_error(const MotionModel& model, std::span<const Window> windows) {
  const HorizonErrors e = evaluate_model(model, windows);
  if (e.human.empty()) return 0.0;
  double total = 0.0;
  for (double v : e.human) total += v;
  return total / static_cast<double>(e.human.size());
}

// ---------------------------------------------------------------------------
// Tables

std::string horizon_seconds_label(std::size_t horizon) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%g", static_cast<double>(horizon) / 10.0);
  return buf;
}

HorizonTable::HorizonTable(std::string title, std::vector<std::string> row_labels, bool fine)
    : title_(std::move(title)), labels_(std::move(row_labels)), rows_(labels_.size()) {
  if (fine) {
    for (std::size_t h = 1; h <= 20; ++h) horizons_.push_back(h);
  } else {
    horizons_ = {5, 10, 15, 20};
  }
}

HorizonTable HorizonTable::human(bool fine) {
  std::vector<std::string> labels;
  for (Variant v : table_variants()) labels.push_back(variant_label(v));
  return HorizonTable("Human motion prediction", labels, fine);
}

HorizonTable HorizonTable::object(bool fine) {
  return HorizonTable("Object motion prediction",
                      {variant_label(Variant::ZeroVelocity), variant_label(Variant::Rnn),
                       variant_label(Variant::CRnnOmp), variant_label(Variant::CRnnOmpLi)},
                      fine);
}

std::size_t HorizonTable::index_of(const std::string& label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw ContractError("table '" + title_ + "' has no row '" + label + "'");
  return static_cast<std::size_t>(it - labels_.begin());
}

void HorizonTable::set_row(const std::string& label, std::span<const double> per_horizon) {
  std::vector<double> row;
  for (std::size_t h : horizons_) {
    if (h > per_horizon.size()) {
      throw DimensionError("row '" + label + "' has " + std::to_string(per_horizon.size()) +
                           " horizons, table needs " + std::to_string(h));
    }
    const double v = per_horizon[h - 1];
    if (!(v >= 0.0)) throw NumericError("row '" + label + "' has a negative or NaN error");
    row.push_back(v);
  }
  rows_[index_of(label)] = std::move(row);
}

const std::optional<std::vector<double>>& HorizonTable::row(const std::string& label) const {
  return rows_[index_of(label)];
}

std::string HorizonTable::to_csv() const {
  std::ostringstream out;
  out << "model";
  for (std::size_t h : horizons_) out << ',' << horizon_seconds_label(h);
  out << '\n';
  out.precision(17);
  for (std::size_t r = 0; r < labels_.size(); ++r) {
    out << labels_[r];
    for (std::size_t c = 0; c < horizons_.size(); ++c) {
      out << ',';
      if (rows_[r]) out << (*rows_[r])[c];
    }
    out << '\n';
  }
  return out.str();
}

std::string HorizonTable::to_text() const {
  std::size_t label_width = 8;
  for (const auto& l : labels_) label_width = std::max(label_width, l.size());
  const int cell = 8;
  std::ostringstream out;
  out << title_ << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(label_width), "Time (s)");
  out << buf;
  for (std::size_t h : horizons_) {
    std::snprintf(buf, sizeof buf, "%*s", cell, horizon_seconds_label(h).c_str());
    out << buf;
  }
  out << '\n';
  for (std::size_t r = 0; r < labels_.size(); ++r) {
    std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(label_width), labels_[r].c_str());
    out << buf;
    for (std::size_t c = 0; c < horizons_.size(); ++c) {
      if (rows_[r]) {
        std::snprintf(buf, sizeof buf, "%*.1f", cell, (*rows_[r])[c]);
      } else {
        std::snprintf(buf, sizeof buf, "%*s", cell, "-");
      }
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Interactions

std::vector<InteractionRecord> interaction_records(const PredictionBundle& bundle) {
  const std::size_t n = bundle.entity_count();
  std::vector<InteractionRecord> out;
  for (std::size_t f = 0; f < bundle.interactions.size(); ++f) {
    const auto& a = bundle.interactions[f];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        out.push_back({f, bundle.entity_ids[i], bundle.entity_ids[j], a[i * n + j]});
  }
  return out;
}

void write_interaction_csv(std::ostream& out, std::span<const InteractionRecord> records) {
  out << "frame,src_entity,dst_entity,weight\n";
  const auto old = out.precision(17);
  for (const auto& r : records) out << r.frame << ',' << r.src << ',' << r.dst << ',' << r.weight << '\n';
  out.precision(old);
}

std::vector<InteractionRecord> read_interaction_csv(std::istream& in) {
  std::vector<InteractionRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 || line.empty()) continue;
    std::istringstream fields(line);
    std::string frame, src, dst, weight;
    if (!std::getline(fields, frame, ',') || !std::getline(fields, src, ',') ||
        !std::getline(fields, dst, ',') || !std::getline(fields, weight)) {
      throw SchemaError(number, "interaction record needs frame,src_entity,dst_entity,weight");
    }
    try {
      out.push_back({std::stoul(frame), src, dst, std::stod(weight)});
    } catch (const std::exception&) {
      throw SchemaError(number, "unparseable interaction record");
    }
  }
  return out;
}

InteractionCurves interaction_statistics(std::span<const std::vector<InteractionRecord>> windows,
                                         const std::function<std::string(const std::string&)>& type_of,
                                         Grouping grouping) {
  const auto label = [&](const std::string& id) {
    return grouping == Grouping::ByType ? type_of(id) : id;
  };
  std::size_t frames = 0;
  for (const auto& w : windows)
    for (const auto& r : w) frames = std::max(frames, r.frame + 1);

  using Acc = std::pair<std::vector<double>, std::vector<std::size_t>>;
  std::map<std::pair<std::string, std::string>, Acc> pair_acc;
  std::map<std::string, Acc> self_acc;
  const auto add = [frames](Acc& acc, std::size_t frame, double w) {
    if (acc.first.empty()) {
      acc.first.assign(frames, 0.0);
      acc.second.assign(frames, 0);
    }
    acc.first[frame] += w;
    ++acc.second[frame];
  };
  for (const auto& w : windows) {
    for (const auto& r : w) {
      add(pair_acc[{label(r.src), label(r.dst)}], r.frame, r.weight);
      if (r.src == r.dst) add(self_acc[label(r.src)], r.frame, r.weight);
    }
  }
  const auto finish = [](const Acc& acc) {
    std::vector<double> curve(acc.first.size());
    for (std::size_t f = 0; f < curve.size(); ++f) {
      curve[f] = acc.second[f] ? acc.first[f] / static_cast<double>(acc.second[f])
                               : std::numeric_limits<double>::quiet_NaN();
    }
    return curve;
  };
  InteractionCurves out;
  for (const auto& [k, acc] : pair_acc) out.pairs[k] = finish(acc);
  for (const auto& [k, acc] : self_acc) out.self[k] = finish(acc);
  return out;
}

void write_curves_csv(std::ostream& out, const InteractionCurves& curves) {
  out << "kind,src,dst,frame,mean_weight\n";
  const auto old = out.precision(17);
  for (const auto& [key, curve] : curves.pairs)
    for (std::size_t f = 0; f < curve.size(); ++f)
      out << "pair," << key.first << ',' << key.second << ',' << f << ',' << curve[f] << '\n';
  for (const auto& [key, curve] : curves.self)
    for (std::size_t f = 0; f < curve.size(); ++f)
      out << "self," << key << ',' << key << ',' << f << ',' << curve[f] << '\n';
  out.precision(old);
}

}  // namespace ctxmotion::eval
