#ifndef NISME_RUNNER_HPP
#define NISME_RUNNER_HPP

#include <filesystem>

#include "nisme/metrics.hpp"
#include "nisme/mode_reduction.hpp"
#include "nisme/nisme_bank.hpp"
#include "nisme/scenario.hpp"

namespace nisme {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct RunResult {
  RunMetrics metrics;
  std::filesystem::path out_dir;
  int bank_size = 0;
  bool reduced = false;
  ReductionAudit audit;  // populated for reduced runs
  Table trace_table;
  Table estimates_table;
};

// Simulate the scenario's plant, run the estimator bank (full or reduced
// mode set), write every artifact (trace/estimates/posteriors CSVs, metrics
// summary, manifest, reduction audit) into the scenario's output directory
// and return the metrics. scenario_path, when given, is fingerprinted into
// the manifest; otherwise the canonical JSON of the spec is.
RunResult run_scenario(const ScenarioSpec& spec,
                       const std::filesystem::path& scenario_path = {});

// Recompute metrics from a run directory's CSV artifacts.
RunMetrics metrics_from_directory(const std::filesystem::path& dir, double dt);

// Standalone mode-reduction audit for a reduced-mode scenario.
ReductionAudit reduction_audit_for(const ScenarioSpec& spec,
                                   std::vector<AttackLocationSet>* kept_union = nullptr);

}  // namespace nisme

#endif  // NISME_RUNNER_HPP
