#include "nisme/runner.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <fstream>
#include <set>

#include <json.hpp>

#include "nisme/numerics.hpp"

namespace nisme {

namespace {

struct LabelDef {
  int id = 0;
  std::set<int> sensors;
  std::set<int> actuators;
  std::set<int> open_lines;
};

std::vector<LabelDef> label_defs(const ScenarioSpec& spec) {
  std::vector<LabelDef> out;
  for (const NetworkModeDef& def : spec.mode_labels) {
    LabelDef l;
    l.id = def.mode_id;
    l.sensors.insert(def.attacked_sensor_outputs.begin(),
                     def.attacked_sensor_outputs.end());
    l.actuators.insert(def.attacked_actuator_slots.begin(),
                       def.attacked_actuator_slots.end());
    l.open_lines.insert(def.open_lines.begin(), def.open_lines.end());
    out.push_back(std::move(l));
  }
  return out;
}

int match_label(const std::vector<LabelDef>& labels, const std::set<int>& sensors,
                const std::set<int>& actuators, const std::set<int>& open_lines) {
  for (const LabelDef& l : labels) {
    if (l.sensors == sensors && l.actuators == actuators && l.open_lines == open_lines) {
      return l.id;
    }
  }
  return -1;
}

// True mode label at a sampling instant, from the schedule activity and the
// actual line status.
int true_label_at(const std::vector<LabelDef>& labels, const AttackSchedule& schedule,
                  double t, const std::vector<char>& line_status) {
  std::set<int> sensors;
  for (const SignalAttackWindow& w : schedule.sensor_attacks) {
    if (t >= w.start && t < w.end) sensors.insert(w.target);
  }
  std::set<int> actuators;
  for (const SignalAttackWindow& w : schedule.actuator_attacks) {
    if (t >= w.start && t < w.end) actuators.insert(w.target);
  }
  std::set<int> open_lines;
  for (std::size_t l = 0; l < line_status.size(); ++l) {
    if (!line_status[l]) open_lines.insert(static_cast<int>(l));
  }
  return match_label(labels, sensors, actuators, open_lines);
}

int structural_index(std::vector<std::vector<int>>& seen, const std::vector<int>& open) {
  std::vector<int> key = open;
  std::sort(key.begin(), key.end());
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] == key) return static_cast<int>(i);
  }
  seen.push_back(key);
  return static_cast<int>(seen.size()) - 1;
}

std::vector<int> location_set(const ScenarioSpec& spec, int input_dim) {
  std::vector<int> locations;
  for (int slot : spec.potential_actuator_slots) locations.push_back(slot);
  for (int out : spec.potential_sensor_outputs) locations.push_back(input_dim + out);
  std::sort(locations.begin(), locations.end());
  return locations;
}

NetworkModeDef def_from_locations(const AttackLocationSet& set, int input_dim,
                                  const std::vector<int>& open_lines, int mode_id,
                                  int structural_id) {
  NetworkModeDef def;
  def.mode_id = mode_id;
  def.structural_id = structural_id;
  def.open_lines = open_lines;
  for (int loc : set.indices) {
    if (loc < input_dim) {
      def.attacked_actuator_slots.push_back(loc);
    } else {
      def.attacked_sensor_outputs.push_back(loc - input_dim);
    }
  }
  return def;
}

std::string audit_text(const ReductionAudit& audit) {
  std::ostringstream os;
  os << "# mode reduction audit: one line per scanned hypothesis\n";
  for (const auto& entry : audit.entries) {
    os << entry.set.to_string() << " ";
    switch (entry.outcome) {
      case ReductionAudit::Outcome::kept:
        os << "kept min_gramian_eig=" << format_double(entry.min_gramian_eig);
        break;
      case ReductionAudit::Outcome::unobservable:
        os << "pruned reason=unobservable min_gramian_eig="
           << format_double(entry.min_gramian_eig);
        break;
      case ReductionAudit::Outcome::dominated:
        os << "pruned reason=dominated by=" << entry.dominating_set;
        break;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace

ReductionAudit reduction_audit_for(const ScenarioSpec& spec,
                                   std::vector<AttackLocationSet>* kept_union) {
  require(spec.mode_kind == ModeSetKind::reduced,
          "reduction audit requires a reduced-mode scenario");
  const PowerNetwork net = spec.build_network();
  const int n = net.state_dim();
  const Matrix q = spec.process_noise * Matrix::Identity(n, n);
  const Matrix r = spec.measurement_noise * Matrix::Identity(net.output_dim(), net.output_dim());

  const Vector setpoint = [&] {
    double total_load = 0.0;
    for (const PowerBus& b : net.buses) total_load += b.load;
    return Vector::Constant(net.input_dim(), total_load / net.input_dim());
  }();
  const std::vector<char> all_closed(net.lines.size(), 1);
  const Vector theta = solve_equilibrium_angles(net, setpoint, all_closed);
  Vector x0 = Vector::Zero(n);
  x0.head(net.bus_count()) = theta;

  const std::vector<int> locations = location_set(spec, net.input_dim());
  const std::vector<AttackLocationSet> candidates = AttackLocationSet::power_set(locations);
  const int horizon = spec.gramian_horizon > 0 ? spec.gramian_horizon : n;

  ReductionAudit audit;
  for (const auto& hypothesis : spec.switch_hypotheses) {
    std::vector<char> closed(net.lines.size(), 1);
    for (int l : hypothesis) closed[l] = 0;
    const LinearPlantData plant = linearize_network(net, closed, x0, q, r, spec.dt);
    ReductionAudit local;
    const std::vector<AttackLocationSet> kept = reduce_modes(
        candidates, plant, 1, 2 + horizon, horizon, spec.a_tol, spec.rank_tol, &local);
    audit.entries.insert(audit.entries.end(), local.entries.begin(), local.entries.end());
    if (kept_union) {
      kept_union->insert(kept_union->end(), kept.begin(), kept.end());
    }
  }
  return audit;
}

RunResult run_scenario(const ScenarioSpec& spec,
                       const std::filesystem::path& scenario_path) {
  spec.validate();
  const PowerNetwork net = spec.build_network();
  const int n = net.state_dim();
  const int m = net.output_dim();
  const int s = net.input_dim();
  const int sd = s + m;
  const int nb = net.bus_count();

  const Matrix q = spec.process_noise * Matrix::Identity(n, n);
  const Matrix r = spec.measurement_noise * Matrix::Identity(m, m);

  // balanced dispatch around which the droop law regulates
  double total_load = 0.0;
  for (const PowerBus& b : net.buses) total_load += b.load;
  DroopController controller;
  controller.kappa = spec.controller_kappa;
  controller.setpoint = Vector::Constant(s, total_load / s);

  const std::vector<char> all_closed(net.lines.size(), 1);
  const Vector theta = solve_equilibrium_angles(net, controller.setpoint, all_closed);
  Vector x0 = Vector::Zero(n);
  x0.head(nb) = theta;

  AttackSchedule schedule;
  if (spec.attacks_enabled) schedule = build_case_study_schedule(spec.targets);

  SimOptions options;
  options.x0 = x0;
  options.dt = spec.dt;
  options.horizon = spec.horizon;
  options.substeps = spec.plant_substeps;
  options.seed = spec.seed;
  options.process_cov = q;
  options.measurement_cov = r;
  options.injection = spec.injection;
  const SimTrace trace = simulate(net, schedule, controller, options);
  const int steps = trace.steps();

  // ---- filter bank --------------------------------------------------------
  RunResult result;
  std::vector<NetworkModeDef> bank_defs;
  if (spec.mode_kind == ModeSetKind::explicit_list) {
    bank_defs = spec.mode_labels;
    std::vector<std::vector<int>> seen;
    for (NetworkModeDef& def : bank_defs) {
      def.structural_id = structural_index(seen, def.open_lines);
    }
  } else {
    result.reduced = true;
  }

  // reduced-set construction, reusable at the re-reduction cadence
  const auto reduce_bank = [&](int c1, int c2,
                               ReductionAudit* audit) -> std::vector<NetworkModeDef> {
    std::vector<NetworkModeDef> defs;
    const std::vector<int> locations = location_set(spec, s);
    const std::vector<AttackLocationSet> candidates =
        AttackLocationSet::power_set(locations);
    const int horizon = spec.gramian_horizon > 0 ? spec.gramian_horizon : n;
    int next_id = 100;  // bank ids live outside the label space
    int structural = 0;
    for (const auto& hypothesis : spec.switch_hypotheses) {
      std::vector<char> closed(net.lines.size(), 1);
      for (int l : hypothesis) closed[l] = 0;
      const LinearPlantData plant = linearize_network(net, closed, x0, q, r, spec.dt);
      ReductionAudit local;
      const std::vector<AttackLocationSet> kept_here =
          reduce_modes(candidates, plant, c1, std::max(c2, c1 + horizon + 1), horizon,
                       spec.a_tol, spec.rank_tol, &local);
      if (audit) {
        audit->entries.insert(audit->entries.end(), local.entries.begin(),
                              local.entries.end());
      }
      require(!kept_here.empty(),
              "run_scenario: mode reduction left no observable mode for a "
              "switch hypothesis");
      for (const AttackLocationSet& set : kept_here) {
        defs.push_back(def_from_locations(set, s, hypothesis, next_id++, structural));
      }
      ++structural;
    }
    return defs;
  };
  if (result.reduced) {
    const int horizon = spec.gramian_horizon > 0 ? spec.gramian_horizon : n;
    bank_defs = reduce_bank(1, 2 + horizon, &result.audit);
  }

  if (spec.delta_floor >= 1.0 / static_cast<double>(std::max<std::size_t>(2, bank_defs.size()))) {
    throw ScenarioError("filter.delta: must satisfy 0 < delta < 1/|modes| (bank of " +
                        std::to_string(bank_defs.size()) + ")");
  }

  BankConfig bank_config;
  bank_config.probability_floor = spec.delta_floor;
  bank_config.alpha1 = spec.alpha1;
  bank_config.alpha2 = spec.alpha2;
  bank_config.nise.rank_tol = spec.rank_tol;
  bank_config.nise.integrator_substeps = spec.filter_substeps;
  bank_config.threads = spec.threads;
  std::optional<NismeBank> bank;
  bank.emplace(mode_models_for_network(net, bank_defs, q, r), bank_config);
  bank->init(x0, spec.x0_cov * Matrix::Identity(n, n), trace.outputs[0], trace.inputs[0]);
  result.bank_size = static_cast<int>(bank->models().size());

  const std::vector<LabelDef> labels = label_defs(spec);
  const double z1_crit = z_quantile(spec.alpha1);
  const double z2_crit = z_quantile(spec.alpha2);

  // ---- tables -------------------------------------------------------------
  Table trace_table;
  trace_table.header.push_back("time");
  for (int i = 0; i < nb; ++i) trace_table.header.push_back("theta_" + std::to_string(i));
  for (int i = 0; i < nb; ++i) trace_table.header.push_back("f_" + std::to_string(i));
  for (int j = 0; j < m; ++j) trace_table.header.push_back("y_" + std::to_string(j));
  for (int g = 0; g < s; ++g) trace_table.header.push_back("u_" + std::to_string(g));
  trace_table.header.push_back("true_mode");
  for (int j = 0; j < m; ++j) trace_table.header.push_back("ds_" + std::to_string(j));
  for (int g = 0; g < s; ++g) trace_table.header.push_back("da_" + std::to_string(g));
  for (std::size_t l = 0; l < net.lines.size(); ++l) {
    trace_table.header.push_back("line_" + std::to_string(l));
  }
  for (int k = 0; k <= steps; ++k) {
    std::vector<double> row;
    row.push_back(trace.times[k]);
    for (int i = 0; i < n; ++i) row.push_back(trace.states[k](i));
    for (int j = 0; j < m; ++j) row.push_back(trace.outputs[k](j));
    for (int g = 0; g < s; ++g) row.push_back(trace.inputs[k](g));
    row.push_back(static_cast<double>(
        true_label_at(labels, schedule, trace.times[k], trace.line_status[k])));
    for (int j = 0; j < m; ++j) row.push_back(trace.sensor_attacks[k](j));
    for (int g = 0; g < s; ++g) row.push_back(trace.actuator_attacks[k](g));
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
      row.push_back(static_cast<double>(trace.line_status[k][l]));
    }
    trace_table.rows.push_back(std::move(row));
  }

  Table est_table;
  est_table.header = {"time", "reported_mode", "map_mode", "significant",
                      "map_log_likelihood"};
  for (int i = 0; i < n; ++i) est_table.header.push_back("xhat_" + std::to_string(i));
  for (int i = 0; i < sd; ++i) est_table.header.push_back("attack_loc_" + std::to_string(i));
  for (int i = 0; i < sd; ++i) est_table.header.push_back("attack_std_" + std::to_string(i));

  Table post_table;
  post_table.header.push_back("time");
  for (int i = 0; i < result.bank_size; ++i) {
    post_table.header.push_back("mu_" + std::to_string(bank->models()[i].mode_id));
  }

  const auto same_defs = [](const std::vector<NetworkModeDef>& a,
                            const std::vector<NetworkModeDef>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].structural_id != b[i].structural_id ||
          a[i].open_lines != b[i].open_lines ||
          a[i].attacked_sensor_outputs != b[i].attacked_sensor_outputs ||
          a[i].attacked_actuator_slots != b[i].attacked_actuator_slots) {
        return false;
      }
    }
    return true;
  };

  // ---- estimation loop ----------------------------------------------------
  const auto wall_start = std::chrono::steady_clock::now();
  for (int k = 1; k <= steps; ++k) {
    const double t_prev = trace.times[k - 1];
    if (result.reduced && spec.reduction_window > 0 && k > 1 &&
        (k - 1) % spec.reduction_window == 0) {
      // re-reduce for the next window; with time-invariant plant data the
      // set never changes and the bank continues untouched
      const std::vector<NetworkModeDef> fresh =
          reduce_bank(k, k + spec.reduction_window, nullptr);
      if (!same_defs(fresh, bank_defs)) {
        const FilterState carry = bank->state().filters[bank->state().map_mode];
        bank_defs = fresh;
        bank.emplace(mode_models_for_network(net, bank_defs, q, r), bank_config);
        bank->init(carry.x_hat, carry.p_x, trace.outputs[k - 1], trace.inputs[k - 1]);
      }
    }
    const JointEstimate joint =
        bank->step(trace.outputs[k], trace.input_record, t_prev, spec.dt);
    const FilterState& map_state = bank->state().filters[bank->state().map_mode];

    Vector attack_loc;
    Vector attack_var = Vector::Zero(sd);
    int reported_label;
    bool significant;
    {
      Vector d1_loc = Vector::Zero(sd);
      Vector d1_var = Vector::Zero(sd);
      Vector d2_loc = Vector::Zero(sd);
      Vector d2_var = Vector::Zero(sd);
      if (map_state.d1_hat.size() > 0) {
        d1_loc = map_state.v1 * map_state.d1_hat;
        d1_var = (map_state.v1 * map_state.p_d1 * map_state.v1.transpose()).diagonal();
      }
      if (map_state.d2_hat.size() > 0) {
        d2_loc = map_state.v2 * map_state.d2_hat;
        d2_var = (map_state.v2 * map_state.p_d2 * map_state.v2.transpose()).diagonal();
      }
      attack_var = d1_var + d2_var;

      if (!result.reduced) {
        reported_label = joint.reported_mode_id;
        significant = joint.attack_significant;
        attack_loc = joint.attack_location_estimate;
      } else {
        const ModeModel& map_model = bank->models()[bank->state().map_mode];
        std::vector<int> hyp;
        for (int i = 0; i < sd; ++i) {
          if (map_model.attack_mask(i, i) != 0.0) hyp.push_back(i);
        }
        const TrueModeDecision decision =
            true_mode_estimation(AttackLocationSet(hyp), s, d1_loc, d1_var, d2_loc,
                                 d2_var, z1_crit, z2_crit);
        significant = decision.significant_locations.cardinality() > 0;
        attack_loc = decision.attack_estimate;
        std::set<int> sensors;
        std::set<int> actuators;
        for (int loc : decision.significant_locations.indices) {
          if (loc < s) {
            actuators.insert(loc);
          } else {
            sensors.insert(loc - s);
          }
        }
        std::set<int> open(bank_defs[bank->state().map_mode].open_lines.begin(),
                           bank_defs[bank->state().map_mode].open_lines.end());
        reported_label = match_label(labels, sensors, actuators, open);
      }
    }

    std::vector<double> row;
    row.push_back(trace.times[k]);
    row.push_back(static_cast<double>(reported_label));
    row.push_back(static_cast<double>(joint.map_mode_id));
    row.push_back(significant ? 1.0 : 0.0);
    row.push_back(joint.map_log_likelihood);
    for (int i = 0; i < n; ++i) row.push_back(joint.x_hat(i));
    for (int i = 0; i < sd; ++i) row.push_back(attack_loc(i));
    for (int i = 0; i < sd; ++i) {
      row.push_back(std::sqrt(std::max(0.0, attack_var(i))));
    }
    est_table.rows.push_back(std::move(row));

    std::vector<double> prow;
    prow.push_back(trace.times[k]);
    // columns track the initial bank; a re-reduction that changes the bank
    // size pads with zeros rather than reshaping the file
    for (int i = 0; i < result.bank_size; ++i) {
      prow.push_back(i < joint.posteriors.size() ? joint.posteriors(i) : 0.0);
    }
    post_table.rows.push_back(std::move(prow));
  }
  const auto wall_end = std::chrono::steady_clock::now();
  const double wall_per_step =
      std::chrono::duration<double>(wall_end - wall_start).count() / std::max(1, steps);

  // ---- artifacts ----------------------------------------------------------
  const std::filesystem::path out_dir(spec.out_dir);
  std::filesystem::create_directories(out_dir);
  write_csv(out_dir / "trace.csv", trace_table);
  write_csv(out_dir / "estimates.csv", est_table);
  write_csv(out_dir / "posteriors.csv", post_table);

  result.metrics = compute_metrics(trace_table, est_table, spec.dt);
  result.metrics.wall_seconds_per_step = wall_per_step;
  {
    std::ofstream os(out_dir / "metrics.txt", std::ios::binary);
    os << render_metrics(result.metrics, spec.name, spec.seed);
  }
  {
    nlohmann::json manifest;
    manifest["scenario"] = spec.name;
    manifest["schema_version"] = spec.schema_version;
    manifest["seed"] = spec.seed;
    manifest["library_version"] = kLibraryVersion;
    manifest["scenario_fingerprint"] = scenario_path.empty()
                                           ? fingerprint_bytes(scenario_to_json(spec))
                                           : fingerprint_file(scenario_path);
    manifest["steps"] = steps;
    manifest["bank_size"] = result.bank_size;
    manifest["reduced_mode_set"] = result.reduced;
    manifest["files"] = {"trace.csv", "estimates.csv", "posteriors.csv", "metrics.txt"};
    std::ofstream os(out_dir / "manifest.json", std::ios::binary);
    os << manifest.dump(2) << "\n";
  }
  if (result.reduced) {
    std::ofstream os(out_dir / "reduction_audit.txt", std::ios::binary);
    os << audit_text(result.audit);
  }

  result.out_dir = out_dir;
  result.trace_table = std::move(trace_table);
  result.estimates_table = std::move(est_table);
  return result;
}

RunMetrics metrics_from_directory(const std::filesystem::path& dir, double dt) {
  const Table trace = read_csv(dir / "trace.csv");
  const Table estimates = read_csv(dir / "estimates.csv");
  return compute_metrics(trace, estimates, dt);
}

}  // namespace nisme
