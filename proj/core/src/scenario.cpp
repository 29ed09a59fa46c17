#include "nisme/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nisme {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ScenarioError(path + ": " + what);
}

template <typename T>
T get_or(const json& j, const std::string& key, const T& fallback,
         const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(path + "." + key, "has the wrong type");
  }
}

std::vector<int> int_list(const json& j, const std::string& key,
                          const std::string& path) {
  std::vector<int> out;
  if (!j.contains(key)) return out;
  if (!j.at(key).is_array()) fail(path + "." + key, "must be a list");
  for (const auto& v : j.at(key)) {
    if (!v.is_number_integer()) fail(path + "." + key, "must hold integers");
    out.push_back(v.get<int>());
  }
  return out;
}

}  // namespace

PowerNetwork ScenarioSpec::build_network() const {
  if (network_preset == "desk9") return make_desk9_network(load_level);
  if (network_preset == "large68") return make_large68_network(load_level);
  throw ScenarioError("network.preset: unknown preset '" + network_preset + "'");
}

void ScenarioSpec::validate() const {
  if (schema_version != 1) throw ScenarioError("schema_version: expected 1");
  if (horizon <= 0.0) throw ScenarioError("horizon_s: must be positive");
  if (dt <= 0.0) throw ScenarioError("sample_period_s: must be positive");
  if (filter_substeps < 1) throw ScenarioError("filter.substeps: must be >= 1");
  if (plant_substeps < 1) throw ScenarioError("plant.substeps: must be >= 1");
  if (threads < 1) throw ScenarioError("filter.threads: must be >= 1");
  if (process_noise <= 0.0) throw ScenarioError("noise.process_cov: must be positive");
  if (measurement_noise <= 0.0)
    throw ScenarioError("noise.measurement_cov: must be positive");
  if (x0_cov < 0.0) throw ScenarioError("filter.x0_cov: must be non-negative");
  if (alpha1 <= 0.0 || alpha1 >= 1.0)
    throw ScenarioError("filter.alpha1: must lie in (0, 1)");
  if (alpha2 <= 0.0 || alpha2 >= 1.0)
    throw ScenarioError("filter.alpha2: must lie in (0, 1)");

  const PowerNetwork net = build_network();
  const int s = net.input_dim();
  const int m = net.output_dim();
  const int lines = static_cast<int>(net.lines.size());

  if (mode_labels.empty()) {
    throw ScenarioError("modes.labels: at least one mode is required");
  }
  if (mode_kind == ModeSetKind::explicit_list) {
    const double limit = 1.0 / static_cast<double>(std::max<std::size_t>(2, mode_labels.size()));
    if (delta_floor <= 0.0 || delta_floor >= limit) {
      throw ScenarioError("filter.delta: must satisfy 0 < delta < 1/|modes|");
    }
  } else {
    // the bank size is only known after reduction; the runner re-checks then
    if (delta_floor <= 0.0 || delta_floor >= 0.5) {
      throw ScenarioError("filter.delta: must satisfy 0 < delta < 1/|modes|");
    }
  }

  const auto check_sensor = [&](int v, const std::string& path) {
    if (v < 0 || v >= m) throw ScenarioError(path + ": output index out of range");
  };
  const auto check_actuator = [&](int v, const std::string& path) {
    if (v < 0 || v >= s) throw ScenarioError(path + ": actuator slot out of range");
  };
  const auto check_line = [&](int v, const std::string& path) {
    if (v < 0 || v >= lines) throw ScenarioError(path + ": line index out of range");
  };

  if (attacks_enabled) {
    for (std::size_t i = 0; i < targets.sensor_outputs.size(); ++i) {
      check_sensor(targets.sensor_outputs[i],
                   "attacks.sensor_outputs[" + std::to_string(i) + "]");
    }
    for (std::size_t i = 0; i < targets.actuator_slots.size(); ++i) {
      check_actuator(targets.actuator_slots[i],
                     "attacks.actuator_slots[" + std::to_string(i) + "]");
    }
    for (std::size_t i = 0; i < targets.switch_lines.size(); ++i) {
      check_line(targets.switch_lines[i],
                 "attacks.switch_lines[" + std::to_string(i) + "]");
    }
  }
  for (std::size_t i = 0; i < mode_labels.size(); ++i) {
    const std::string base = "modes.labels[" + std::to_string(i) + "]";
    for (int v : mode_labels[i].attacked_sensor_outputs) check_sensor(v, base + ".sensors");
    for (int v : mode_labels[i].attacked_actuator_slots)
      check_actuator(v, base + ".actuators");
    for (int v : mode_labels[i].open_lines) check_line(v, base + ".open_lines");
  }
  if (mode_kind == ModeSetKind::reduced) {
    for (std::size_t i = 0; i < potential_sensor_outputs.size(); ++i) {
      check_sensor(potential_sensor_outputs[i],
                   "modes.potential_sensors[" + std::to_string(i) + "]");
    }
    for (std::size_t i = 0; i < potential_actuator_slots.size(); ++i) {
      check_actuator(potential_actuator_slots[i],
                     "modes.potential_actuators[" + std::to_string(i) + "]");
    }
    if (switch_hypotheses.empty()) {
      throw ScenarioError("modes.switch_hypotheses: at least one is required");
    }
    for (std::size_t i = 0; i < switch_hypotheses.size(); ++i) {
      for (int v : switch_hypotheses[i]) {
        check_line(v, "modes.switch_hypotheses[" + std::to_string(i) + "]");
      }
    }
  }
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ScenarioError(path.string() + ": cannot open scenario file");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ScenarioError(path.string() + ": invalid JSON: " + e.what());
  }

  ScenarioSpec spec;
  spec.schema_version = get_or<int>(j, "schema_version", 0, "");
  spec.name = get_or<std::string>(j, "name", "unnamed", "");
  spec.seed = get_or<std::uint64_t>(j, "seed", 0, "");
  spec.horizon = get_or<double>(j, "horizon_s", 40.0, "");
  spec.dt = get_or<double>(j, "sample_period_s", 0.01, "");

  if (j.contains("network")) {
    const json& n = j.at("network");
    spec.network_preset = get_or<std::string>(n, "preset", "desk9", "network");
    spec.load_level = get_or<double>(n, "load_level", 0.3, "network");
  }
  if (j.contains("controller")) {
    spec.controller_kappa = get_or<double>(j.at("controller"), "kappa", 5.0, "controller");
  }
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    spec.process_noise = get_or<double>(n, "process_cov", 1e-4, "noise");
    spec.measurement_noise = get_or<double>(n, "measurement_cov", 1e-8, "noise");
    const std::string inj = get_or<std::string>(n, "injection", "held", "noise");
    if (inj == "held") {
      spec.injection = NoiseInjection::held_per_sample;
    } else if (inj == "em_substep") {
      spec.injection = NoiseInjection::em_substep;
    } else {
      fail("noise.injection", "must be 'held' or 'em_substep'");
    }
  }
  if (j.contains("attacks")) {
    const json& a = j.at("attacks");
    spec.attacks_enabled = get_or<bool>(a, "enabled", true, "attacks");
    spec.targets.sensor_outputs = int_list(a, "sensor_outputs", "attacks");
    spec.targets.actuator_slots = int_list(a, "actuator_slots", "attacks");
    spec.targets.switch_lines = int_list(a, "switch_lines", "attacks");
  }
  if (j.contains("modes")) {
    const json& mo = j.at("modes");
    const std::string kind = get_or<std::string>(mo, "kind", "explicit", "modes");
    if (kind == "explicit") {
      spec.mode_kind = ModeSetKind::explicit_list;
    } else if (kind == "reduced") {
      spec.mode_kind = ModeSetKind::reduced;
    } else {
      fail("modes.kind", "must be 'explicit' or 'reduced'");
    }
    if (mo.contains("labels")) {
      if (!mo.at("labels").is_array()) fail("modes.labels", "must be a list");
      int idx = 0;
      for (const auto& entry : mo.at("labels")) {
        NetworkModeDef def;
        const std::string base = "modes.labels[" + std::to_string(idx) + "]";
        def.mode_id = get_or<int>(entry, "id", idx, base);
        def.open_lines = int_list(entry, "open_lines", base);
        def.attacked_sensor_outputs = int_list(entry, "sensors", base);
        def.attacked_actuator_slots = int_list(entry, "actuators", base);
        spec.mode_labels.push_back(std::move(def));
        ++idx;
      }
    }
    spec.potential_sensor_outputs = int_list(mo, "potential_sensors", "modes");
    spec.potential_actuator_slots = int_list(mo, "potential_actuators", "modes");
    if (mo.contains("switch_hypotheses")) {
      if (!mo.at("switch_hypotheses").is_array()) {
        fail("modes.switch_hypotheses", "must be a list of line lists");
      }
      for (const auto& h : mo.at("switch_hypotheses")) {
        std::vector<int> lines;
        for (const auto& v : h) {
          if (!v.is_number_integer()) fail("modes.switch_hypotheses", "must hold integers");
          lines.push_back(v.get<int>());
        }
        spec.switch_hypotheses.push_back(std::move(lines));
      }
    }
  }
  if (j.contains("filter")) {
    const json& f = j.at("filter");
    spec.delta_floor = get_or<double>(f, "delta", 0.033, "filter");
    spec.alpha1 = get_or<double>(f, "alpha1", 0.75, "filter");
    spec.alpha2 = get_or<double>(f, "alpha2", 0.75, "filter");
    spec.filter_substeps = get_or<int>(f, "substeps", 1, "filter");
    spec.rank_tol = get_or<double>(f, "rank_tol", 1e-10, "filter");
    spec.a_tol = get_or<double>(f, "a_tol", 1e-8, "filter");
    spec.gramian_horizon = get_or<int>(f, "gramian_horizon", 0, "filter");
    spec.reduction_window = get_or<int>(f, "reduction_window", 0, "filter");
    spec.x0_cov = get_or<double>(f, "x0_cov", 1e-6, "filter");
    spec.threads = get_or<int>(f, "threads", 1, "filter");
  }
  if (j.contains("plant")) {
    spec.plant_substeps = get_or<int>(j.at("plant"), "substeps", 10, "plant");
  }
  if (j.contains("output")) {
    spec.out_dir = get_or<std::string>(j.at("output"), "directory", "out", "output");
  }
  spec.validate();
  return spec;
}

std::string scenario_to_json(const ScenarioSpec& spec) {
  json j;
  j["schema_version"] = spec.schema_version;
  j["name"] = spec.name;
  j["seed"] = spec.seed;
  j["horizon_s"] = spec.horizon;
  j["sample_period_s"] = spec.dt;
  j["network"] = {{"preset", spec.network_preset}, {"load_level", spec.load_level}};
  j["controller"] = {{"kappa", spec.controller_kappa}};
  j["noise"] = {
      {"process_cov", spec.process_noise},
      {"measurement_cov", spec.measurement_noise},
      {"injection",
       spec.injection == NoiseInjection::held_per_sample ? "held" : "em_substep"}};
  j["attacks"] = {{"enabled", spec.attacks_enabled},
                  {"sensor_outputs", spec.targets.sensor_outputs},
                  {"actuator_slots", spec.targets.actuator_slots},
                  {"switch_lines", spec.targets.switch_lines}};
  json labels = json::array();
  for (const NetworkModeDef& def : spec.mode_labels) {
    labels.push_back({{"id", def.mode_id},
                      {"open_lines", def.open_lines},
                      {"sensors", def.attacked_sensor_outputs},
                      {"actuators", def.attacked_actuator_slots}});
  }
  j["modes"] = {
      {"kind", spec.mode_kind == ModeSetKind::explicit_list ? "explicit" : "reduced"},
      {"labels", labels},
      {"potential_sensors", spec.potential_sensor_outputs},
      {"potential_actuators", spec.potential_actuator_slots},
      {"switch_hypotheses", spec.switch_hypotheses}};
  j["filter"] = {{"delta", spec.delta_floor},
                 {"alpha1", spec.alpha1},
                 {"alpha2", spec.alpha2},
                 {"substeps", spec.filter_substeps},
                 {"rank_tol", spec.rank_tol},
                 {"a_tol", spec.a_tol},
                 {"gramian_horizon", spec.gramian_horizon},
                 {"reduction_window", spec.reduction_window},
                 {"x0_cov", spec.x0_cov},
                 {"threads", spec.threads}};
  j["plant"] = {{"substeps", spec.plant_substeps}};
  j["output"] = {{"directory", spec.out_dir}};
  return j.dump(2) + "\n";
}

std::string fingerprint_bytes(const std::string& bytes) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << hash;
  return os.str();
}

std::string fingerprint_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ScenarioError(path.string() + ": cannot open for fingerprinting");
  std::ostringstream ss;
  ss << is.rdbuf();
  return fingerprint_bytes(ss.str());
}

}  // namespace nisme
