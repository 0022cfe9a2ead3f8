#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctxmotion/motion_model.hpp"
#include "ctxmotion/scene.hpp"

namespace ctxmotion::eval {

/// Mean 3-D distance over all joints of all humans at one time step.
double human_error(std::span<const Skeleton> predicted, std::span<const Skeleton> truth);
/// Mean distance over the 8 vertices of every box at one time step.
double object_error(std::span<const BoundingBox> predicted, std::span<const BoundingBox> truth);

/// Horizon h (1-based) is the frame h * 100 ms after the last observed one.
double human_error(const PredictionBundle& bundle, const Window& window, std::size_t horizon);
/// Non-human entities only; nullopt when the bundle carries no boxes or the
/// window has no objects.
std::optional<double> object_error(const PredictionBundle& bundle, const Window& window,
                                   std::size_t horizon);

/// Per-horizon errors averaged over windows (each window weighs the same).
struct HorizonErrors {
  std::vector<double> human;
  std::vector<double> object;  // empty when no window had predicted objects
  std::size_t windows = 0;
};

HorizonErrors evaluate(std::span<const PredictionBundle> bundles, std::span<const Window> windows);
HorizonErrors evaluate_model(const MotionModel& model, std::span<const Window> windows,
                             std::size_t batch = 16);
HorizonErrors evaluate_zero_velocity(std::span<const Window> windows, std::size_t predicted = 20);
/// Mean of the per-horizon human errors; the early-stopping signal.
double validation_error(const MotionModel& model, std::span<const Window> windows);

/// Error table with one row per model. Fine tables have the 20 horizons
/// 0.1 s .. 2 s, coarse ones the subset 0.5, 1, 1.5, 2 s.
class HorizonTable {
 public:
  HorizonTable(std::string title, std::vector<std::string> row_labels, bool fine);

  /// Human-motion rows ZV, RNN, C-RNN, C-RNN+OMP, C-RNN+LI, C-RNN+OMP+LI.
  static HorizonTable human(bool fine);
  /// Object-motion rows ZV, RNN, C-RNN+OMP, C-RNN+OMP+LI.
  static HorizonTable object(bool fine);

  const std::string& title() const { return title_; }
  const std::vector<std::size_t>& horizons() const { return horizons_; }
  const std::vector<std::string>& row_labels() const { return labels_; }
  std::size_t column_count() const { return horizons_.size(); }
  /// `per_horizon` holds errors for horizons 1..N, N >= the largest column.
  void set_row(const std::string& label, std::span<const double> per_horizon);
  const std::optional<std::vector<double>>& row(const std::string& label) const;

  /// Header `model,<seconds>...`; rows without results have empty cells.
  std::string to_csv() const;
  /// Aligned text, one decimal, "-" for rows without results.
  std::string to_text() const;

 private:
  std::size_t index_of(const std::string& label) const;

  std::string title_;
  std::vector<std::string> labels_;
  std::vector<std::size_t> horizons_;
  std::vector<std::optional<std::vector<double>>> rows_;
};

std::string horizon_seconds_label(std::size_t horizon);

// ---------------------------------------------------------------------------
// Interactions

/// One adjacency entry: `weight` is A[src][dst], the share of src's
/// aggregated context drawn from dst. `frame` counts from the first observed frame.
struct InteractionRecord {
  std::size_t frame = 0;
  std::string src;
  std::string dst;
  double weight = 0.0;
};

std::vector<InteractionRecord> interaction_records(const PredictionBundle& bundle);
void write_interaction_csv(std::ostream& out, std::span<const InteractionRecord> records);
std::vector<InteractionRecord> read_interaction_csv(std::istream& in);

enum class Grouping { ByType, ByEntity };

struct InteractionCurves {
  /// (src label, dst label) -> mean weight per frame index. Diagonal entries
  /// are included, so same-type pairs pool self and cross weights.
  std::map<std::pair<std::string, std::string>, std::vector<double>> pairs;
  /// label -> mean diagonal weight per frame index.
  std::map<std::string, std::vector<double>> self;
};

/// Averages records of many windows. `type_of` maps entity ids to type
/// names for Grouping::ByType; ByEntity keeps ids. Frames with no entries are NaN.
InteractionCurves interaction_statistics(std::span<const std::vector<InteractionRecord>> windows,
                                         const std::function<std::string(const std::string&)>& type_of,
                                         Grouping grouping);
void write_curves_csv(std::ostream& out, const InteractionCurves& curves);

}  // namespace ctxmotion::eval
