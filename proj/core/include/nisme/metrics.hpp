#ifndef NISME_METRICS_HPP
#define NISME_METRICS_HPP

#include <string>
#include <vector>

#include "nisme/csv.hpp"

namespace nisme {

struct PhaseMetrics {
  double start = 0.0;
  double end = 0.0;
  int true_mode = 0;
  double accuracy = 0.0;
};

struct TransitionMetrics {
  double time = 0.0;
  int to_mode = 0;
  bool detected = false;
  double latency_s = 0.0;  // first match held for 10 consecutive steps
};

struct RunMetrics {
  int steps = 0;
  double dt = 0.0;
  double overall_mode_accuracy = 0.0;
  std::vector<PhaseMetrics> phases;
  std::vector<TransitionMetrics> transitions;
  std::vector<double> state_rmse;        // per state
  std::vector<double> attack_rmse;       // per signal location
  std::vector<double> attack_std_mean;   // mean reported posterior std per location
  std::vector<int> reported_modes;       // per step 1..N
  std::vector<int> true_modes;           // per step 1..N
  double wall_seconds_per_step = 0.0;    // measured, not derived from tables

  bool same_shape(const RunMetrics& other) const {
    return steps == other.steps && dt == other.dt;
  }
};

// Derive every table-based metric from the written artifacts. trace and
// estimates are the tables produced by a run (or re-read from its CSVs).
RunMetrics compute_metrics(const Table& trace, const Table& estimates, double dt);

// Structured text rendering (key: value lines) and its inverse-free summary.
std::string render_metrics(const RunMetrics& m, const std::string& scenario_name,
                           unsigned long long seed);

struct ComparisonReport {
  double mode_divergence_fraction = 0.0;
  double max_state_rmse_delta = 0.0;
  double max_attack_rmse_delta = 0.0;
  double overall_accuracy_delta = 0.0;
  bool divergence_flagged = false;
  std::string text;
};

// Per-metric deltas between runs of the same horizon; flags when the
// reported-mode sequences differ on more than threshold of the steps.
ComparisonReport compare_runs(const RunMetrics& a, const RunMetrics& b,
                              double divergence_threshold = 0.05);

}  // namespace nisme

#endif  // NISME_METRICS_HPP
