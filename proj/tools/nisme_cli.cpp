// Command-line front end: validate scenario files, run them, audit mode
// reduction, and compare finished runs.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nisme/runner.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct CommonArgs {
  std::string scenario;
  std::string out;
  long long seed = -1;
  int threads = 0;
};

nisme::ScenarioSpec load_with_overrides(const CommonArgs& args) {
  nisme::ScenarioSpec spec = nisme::load_scenario(args.scenario);
  if (args.seed >= 0) spec.seed = static_cast<std::uint64_t>(args.seed);
  if (!args.out.empty()) spec.out_dir = args.out;
  if (args.threads > 0) spec.threads = args.threads;
  return spec;
}

void print_summary(const nisme::RunResult& result) {
  std::cout << "bank_size: " << result.bank_size << "\n";
  std::cout << "overall_mode_accuracy: "
            << nisme::format_double(result.metrics.overall_mode_accuracy) << "\n";
  std::cout << "wall_seconds_per_step: "
            << nisme::format_double(result.metrics.wall_seconds_per_step) << "\n";
  std::cout << "artifacts: " << result.out_dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attack-resilient joint state/attack/mode estimation simulator"};
  app.require_subcommand(1);

  CommonArgs args;

  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("--scenario", args.scenario, "Scenario JSON path")->required();

  auto* run = app.add_subcommand("run", "Simulate and estimate a scenario");
  run->add_option("--scenario", args.scenario, "Scenario JSON path")->required();
  run->add_option("--seed", args.seed, "Override the scenario seed");
  run->add_option("--out", args.out, "Override the output directory");
  run->add_option("--threads", args.threads, "Worker threads for the filter bank");

  auto* reduce = app.add_subcommand("reduce", "Standalone mode-reduction audit");
  reduce->add_option("--scenario", args.scenario, "Scenario JSON path")->required();
  reduce->add_option("--out", args.out, "Write the audit to this directory");

  std::string dir_a, dir_b;
  double threshold = 0.05;
  auto* compare = app.add_subcommand("compare", "Compare two finished runs");
  compare->add_option("--a", dir_a, "First run directory")->required();
  compare->add_option("--b", dir_b, "Second run directory")->required();
  compare->add_option("--threshold", threshold, "Mode-divergence flag threshold");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      nisme::load_scenario(args.scenario);
      std::cout << "ok: " << args.scenario << "\n";
      return 0;
    }
    if (run->parsed()) {
      const nisme::ScenarioSpec spec = load_with_overrides(args);
      const nisme::RunResult result = nisme::run_scenario(spec, args.scenario);
      print_summary(result);
      return 0;
    }
    if (reduce->parsed()) {
      nisme::ScenarioSpec spec = load_with_overrides(args);
      std::vector<nisme::AttackLocationSet> kept;
      const nisme::ReductionAudit audit = nisme::reduction_audit_for(spec, &kept);
      int kept_count = 0;
      for (const auto& e : audit.entries) {
        if (e.outcome == nisme::ReductionAudit::Outcome::kept) ++kept_count;
      }
      std::cout << "scanned: " << audit.entries.size() << "\n";
      std::cout << "kept: " << kept_count << "\n";
      for (const auto& e : audit.entries) {
        if (e.outcome == nisme::ReductionAudit::Outcome::kept) {
          std::cout << "  " << e.set.to_string() << " min_gramian_eig="
                    << nisme::format_double(e.min_gramian_eig) << "\n";
        }
      }
      if (!args.out.empty()) {
        std::filesystem::create_directories(args.out);
        std::ofstream os(std::filesystem::path(args.out) / "reduction_audit.txt",
                         std::ios::binary);
        for (const auto& e : audit.entries) {
          os << e.set.to_string() << " "
             << (e.outcome == nisme::ReductionAudit::Outcome::kept ? "kept" : "pruned")
             << "\n";
        }
      }
      return 0;
    }
    if (compare->parsed()) {
      const auto dt_of = [](const std::filesystem::path& dir) {
        const nisme::Table t = nisme::read_csv(dir / "trace.csv");
        if (t.rows.size() < 2) throw nisme::DomainError("compare: trace too short");
        return t.rows[1][0] - t.rows[0][0];
      };
      const double dt_a = dt_of(dir_a);
      const double dt_b = dt_of(dir_b);
      const nisme::RunMetrics a = nisme::metrics_from_directory(dir_a, dt_a);
      const nisme::RunMetrics b = nisme::metrics_from_directory(dir_b, dt_b);
      const nisme::ComparisonReport report = nisme::compare_runs(a, b, threshold);
      std::cout << report.text;
      return 0;
    }
  } catch (const nisme::ScenarioError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const nisme::DomainError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
