#include "nisme/metrics.hpp"

#include <cmath>
#include <sstream>

#include "nisme/types.hpp"

namespace nisme {

namespace {

constexpr int kLatencyHold = 10;  // consecutive matching steps after a switch

std::vector<int> int_column(const Table& t, int col) {
  std::vector<int> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) out.push_back(static_cast<int>(std::llround(row[col])));
  return out;
}

}  // namespace

RunMetrics compute_metrics(const Table& trace, const Table& estimates, double dt) {
  RunMetrics m;
  m.dt = dt;
  m.steps = static_cast<int>(estimates.rows.size());
  require(static_cast<int>(trace.rows.size()) == m.steps + 1,
          "compute_metrics: trace must hold one more instant than estimates");

  const int true_mode_col = trace.column("true_mode");
  const int reported_col = estimates.column("reported_mode");
  require(true_mode_col >= 0 && reported_col >= 0,
          "compute_metrics: missing mode columns");

  const std::vector<int> trace_modes = int_column(trace, true_mode_col);
  m.true_modes.assign(trace_modes.begin() + 1, trace_modes.end());
  m.reported_modes = int_column(estimates, reported_col);

  int hits = 0;
  for (int k = 0; k < m.steps; ++k) {
    if (m.reported_modes[k] == m.true_modes[k]) ++hits;
  }
  m.overall_mode_accuracy = m.steps > 0 ? static_cast<double>(hits) / m.steps : 0.0;

  // maximal runs of a constant true mode
  int phase_start = 0;
  for (int k = 1; k <= m.steps; ++k) {
    if (k == m.steps || m.true_modes[k] != m.true_modes[phase_start]) {
      PhaseMetrics phase;
      phase.start = static_cast<double>(phase_start + 1) * dt;
      phase.end = static_cast<double>(k + 1) * dt;
      phase.true_mode = m.true_modes[phase_start];
      int phase_hits = 0;
      for (int j = phase_start; j < k; ++j) {
        if (m.reported_modes[j] == m.true_modes[j]) ++phase_hits;
      }
      phase.accuracy = static_cast<double>(phase_hits) / (k - phase_start);
      m.phases.push_back(phase);
      phase_start = k;
    }
  }

  for (int k = 1; k < m.steps; ++k) {
    if (m.true_modes[k] == m.true_modes[k - 1]) continue;
    TransitionMetrics tr;
    tr.time = static_cast<double>(k + 1) * dt;
    tr.to_mode = m.true_modes[k];
    tr.detected = false;
    for (int j = k; j + kLatencyHold <= m.steps; ++j) {
      bool held = true;
      for (int h = 0; h < kLatencyHold; ++h) {
        if (m.reported_modes[j + h] != tr.to_mode) {
          held = false;
          break;
        }
      }
      if (held) {
        tr.detected = true;
        tr.latency_s = static_cast<double>(j - k) * dt;
        break;
      }
    }
    m.transitions.push_back(tr);
  }

  // state RMSE: truth columns are theta_* then f_*, matching the state layout
  std::vector<int> truth_cols = trace.columns_with_prefix("theta_");
  const std::vector<int> f_cols = trace.columns_with_prefix("f_");
  truth_cols.insert(truth_cols.end(), f_cols.begin(), f_cols.end());
  const std::vector<int> est_cols = estimates.columns_with_prefix("xhat_");
  require(truth_cols.size() == est_cols.size(), "compute_metrics: state column mismatch");
  m.state_rmse.assign(truth_cols.size(), 0.0);
  for (int k = 0; k < m.steps; ++k) {
    for (std::size_t i = 0; i < truth_cols.size(); ++i) {
      const double err = trace.rows[k + 1][truth_cols[i]] - estimates.rows[k][est_cols[i]];
      m.state_rmse[i] += err * err;
    }
  }
  for (double& v : m.state_rmse) v = std::sqrt(v / std::max(1, m.steps));

  // attack estimate RMSE per signal location; the dynamics component refers
  // to the previous instant, so actuator locations compare against the
  // preceding trace row
  const std::vector<int> da_cols = trace.columns_with_prefix("da_");
  const std::vector<int> ds_cols = trace.columns_with_prefix("ds_");
  const std::vector<int> attack_cols = estimates.columns_with_prefix("attack_loc_");
  const std::vector<int> std_cols = estimates.columns_with_prefix("attack_std_");
  const int s = static_cast<int>(da_cols.size());
  const int sd = static_cast<int>(attack_cols.size());
  require(sd == s + static_cast<int>(ds_cols.size()),
          "compute_metrics: attack column mismatch");
  m.attack_rmse.assign(sd, 0.0);
  m.attack_std_mean.assign(sd, 0.0);
  for (int k = 0; k < m.steps; ++k) {
    for (int loc = 0; loc < sd; ++loc) {
      const double truth = loc < s ? trace.rows[k][da_cols[loc]]
                                   : trace.rows[k + 1][ds_cols[loc - s]];
      const double err = truth - estimates.rows[k][attack_cols[loc]];
      m.attack_rmse[loc] += err * err;
      m.attack_std_mean[loc] += estimates.rows[k][std_cols[loc]];
    }
  }
  for (double& v : m.attack_rmse) v = std::sqrt(v / std::max(1, m.steps));
  for (double& v : m.attack_std_mean) v /= std::max(1, m.steps);
  return m;
}

std::string render_metrics(const RunMetrics& m, const std::string& scenario_name,
                           unsigned long long seed) {
  std::ostringstream os;
  os << "scenario: " << scenario_name << "\n";
  os << "seed: " << seed << "\n";
  os << "steps: " << m.steps << "\n";
  os << "dt: " << format_double(m.dt) << "\n";
  os << "overall_mode_accuracy: " << format_double(m.overall_mode_accuracy) << "\n";
  for (const PhaseMetrics& p : m.phases) {
    os << "phase: start=" << format_double(p.start) << " end=" << format_double(p.end)
       << " true_mode=" << p.true_mode << " accuracy=" << format_double(p.accuracy)
       << "\n";
  }
  for (const TransitionMetrics& t : m.transitions) {
    os << "transition: time=" << format_double(t.time) << " to_mode=" << t.to_mode
       << " detected=" << (t.detected ? 1 : 0)
       << " latency_s=" << format_double(t.detected ? t.latency_s : -1.0) << "\n";
  }
  os << "state_rmse:";
  for (double v : m.state_rmse) os << " " << format_double(v);
  os << "\n";
  os << "attack_rmse:";
  for (double v : m.attack_rmse) os << " " << format_double(v);
  os << "\n";
  os << "attack_std_mean:";
  for (double v : m.attack_std_mean) os << " " << format_double(v);
  os << "\n";
  os << "wall_seconds_per_step: " << format_double(m.wall_seconds_per_step) << "\n";
  return os.str();
}

ComparisonReport compare_runs(const RunMetrics& a, const RunMetrics& b,
                              double divergence_threshold) {
  require(a.same_shape(b), "compare_runs: runs cover different horizons");
  ComparisonReport report;
  int diff = 0;
  for (int k = 0; k < a.steps; ++k) {
    if (a.reported_modes[k] != b.reported_modes[k]) ++diff;
  }
  report.mode_divergence_fraction =
      a.steps > 0 ? static_cast<double>(diff) / a.steps : 0.0;
  report.divergence_flagged = report.mode_divergence_fraction > divergence_threshold;
  report.overall_accuracy_delta = b.overall_mode_accuracy - a.overall_mode_accuracy;
  for (std::size_t i = 0; i < a.state_rmse.size() && i < b.state_rmse.size(); ++i) {
    report.max_state_rmse_delta = std::max(report.max_state_rmse_delta,
                                           std::abs(a.state_rmse[i] - b.state_rmse[i]));
  }
  for (std::size_t i = 0; i < a.attack_rmse.size() && i < b.attack_rmse.size(); ++i) {
    report.max_attack_rmse_delta = std::max(
        report.max_attack_rmse_delta, std::abs(a.attack_rmse[i] - b.attack_rmse[i]));
  }
  std::ostringstream os;
  os << "mode_divergence_fraction: " << format_double(report.mode_divergence_fraction)
     << "\n"
     << "divergence_flagged: " << (report.divergence_flagged ? 1 : 0) << "\n"
     << "overall_accuracy_delta: " << format_double(report.overall_accuracy_delta)
     << "\n"
     << "max_state_rmse_delta: " << format_double(report.max_state_rmse_delta) << "\n"
     << "max_attack_rmse_delta: " << format_double(report.max_attack_rmse_delta)
     << "\n";
  report.text = os.str();
  return report;
}

}  // namespace nisme
