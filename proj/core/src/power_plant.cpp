#include "nisme/power_plant.hpp"

#include <algorithm>
#include <cmath>

#include "nisme/rng.hpp"

namespace nisme {

int PowerNetwork::input_dim() const {
  int s = 0;
  for (const PowerBus& b : buses) s += b.is_generator ? 1 : 0;
  return s;
}

std::vector<int> PowerNetwork::generator_buses() const {
  std::vector<int> out;
  for (int i = 0; i < bus_count(); ++i) {
    if (buses[i].is_generator) out.push_back(i);
  }
  return out;
}

int PowerNetwork::input_slot(int bus) const {
  int slot = 0;
  for (int i = 0; i < bus_count(); ++i) {
    if (!buses[i].is_generator) continue;
    if (i == bus) return slot;
    ++slot;
  }
  return -1;
}

bool PowerNetwork::connected(const std::vector<char>& line_closed) const {
  const int n = bus_count();
  if (n == 0) return false;
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const int b = stack.back();
    stack.pop_back();
    for (std::size_t l = 0; l < lines.size(); ++l) {
      if (!line_closed[l]) continue;
      int other = -1;
      if (lines[l].from == b) other = lines[l].to;
      if (lines[l].to == b) other = lines[l].from;
      if (other >= 0 && !seen[other]) {
        seen[other] = 1;
        stack.push_back(other);
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

void PowerNetwork::validate() const {
  require(!buses.empty(), "PowerNetwork: no buses");
  for (const PowerBus& b : buses) {
    require(b.inertia > 0.0, "PowerNetwork: inertia must be positive");
  }
  for (const PowerLine& l : lines) {
    require(l.from >= 0 && l.from < bus_count() && l.to >= 0 && l.to < bus_count() &&
                l.from != l.to,
            "PowerNetwork: line endpoints out of range");
  }
  require(input_dim() > 0, "PowerNetwork: at least one generator bus required");
}

Vector PowerNetwork::flow_injections(const Vector& theta,
                                     const std::vector<char>& line_closed) const {
  Vector inj = Vector::Zero(bus_count());
  for (std::size_t l = 0; l < lines.size(); ++l) {
    if (!line_closed[l]) continue;
    const PowerLine& line = lines[l];
    const double flow =
        line.susceptance * std::sin(theta(line.from) - theta(line.to));
    inj(line.from) += flow;
    inj(line.to) -= flow;  // antisymmetric by construction
  }
  return inj;
}

Vector PowerNetwork::dynamics(const Vector& x, const Vector& u_applied,
                              const std::vector<char>& line_closed) const {
  const int nb = bus_count();
  const Vector theta = x.head(nb);
  const Vector freq = x.tail(nb);
  const Vector flows = flow_injections(theta, line_closed);

  Vector xdot(2 * nb);
  xdot.head(nb) = freq;
  for (int i = 0; i < nb; ++i) {
    const PowerBus& bus = buses[i];
    double mech = 0.0;
    if (bus.is_generator) mech = u_applied(input_slot(i));
    xdot(nb + i) =
        -(bus.damping * freq(i) + flows(i) - mech + bus.load) / bus.inertia;
  }
  return xdot;
}

Vector PowerNetwork::output(const Vector& x) const {
  const int nb = bus_count();
  Vector y(3 * nb);
  for (int i = 0; i < nb; ++i) {
    const double f = x(nb + i);
    y(3 * i) = buses[i].load + buses[i].damping * f;  // electrical power
    y(3 * i + 1) = x(i);                              // phase angle
    y(3 * i + 2) = f;                                 // frequency
  }
  return y;
}

Matrix PowerNetwork::dynamics_jacobian(const Vector& x,
                                       const std::vector<char>& line_closed) const {
  const int nb = bus_count();
  Matrix a = Matrix::Zero(2 * nb, 2 * nb);
  a.topRightCorner(nb, nb) = Matrix::Identity(nb, nb);
  const Vector theta = x.head(nb);
  for (std::size_t l = 0; l < lines.size(); ++l) {
    if (!line_closed[l]) continue;
    const PowerLine& line = lines[l];
    const double coupling =
        line.susceptance * std::cos(theta(line.from) - theta(line.to));
    const int i = line.from;
    const int j = line.to;
    a(nb + i, i) -= coupling / buses[i].inertia;
    a(nb + i, j) += coupling / buses[i].inertia;
    a(nb + j, j) -= coupling / buses[j].inertia;
    a(nb + j, i) += coupling / buses[j].inertia;
  }
  for (int i = 0; i < nb; ++i) {
    a(nb + i, nb + i) = -buses[i].damping / buses[i].inertia;
  }
  return a;
}

Matrix PowerNetwork::output_jacobian() const {
  const int nb = bus_count();
  Matrix c = Matrix::Zero(3 * nb, 2 * nb);
  for (int i = 0; i < nb; ++i) {
    c(3 * i, nb + i) = buses[i].damping;
    c(3 * i + 1, i) = 1.0;
    c(3 * i + 2, nb + i) = 1.0;
  }
  return c;
}

Matrix PowerNetwork::input_map() const {
  const int nb = bus_count();
  Matrix b = Matrix::Zero(2 * nb, input_dim());
  for (int i = 0; i < nb; ++i) {
    if (!buses[i].is_generator) continue;
    b(nb + i, input_slot(i)) = 1.0 / buses[i].inertia;
  }
  return b;
}

Vector DroopController::command(const PowerNetwork& net, const Vector& x) const {
  const int nb = net.bus_count();
  Vector u(net.input_dim());
  for (int bus : net.generator_buses()) {
    u(net.input_slot(bus)) = setpoint(net.input_slot(bus)) - kappa * x(nb + bus);
  }
  return u;
}

Vector AttackSchedule::sensor_attack_at(double t, int output_dim) const {
  Vector d = Vector::Zero(output_dim);
  for (const SignalAttackWindow& w : sensor_attacks) {
    if (t >= w.start && t < w.end) d(w.target) += w.signal(t);
  }
  return d;
}

Vector AttackSchedule::actuator_attack_at(double t, int input_dim) const {
  Vector d = Vector::Zero(input_dim);
  for (const SignalAttackWindow& w : actuator_attacks) {
    if (t >= w.start && t < w.end) d(w.target) += w.signal(t);
  }
  return d;
}

void AttackSchedule::validate(const PowerNetwork& net, double horizon) const {
  for (const SignalAttackWindow& w : sensor_attacks) {
    require(w.target >= 0 && w.target < net.output_dim(),
            "AttackSchedule: sensor target outside the network");
    require(w.start <= w.end && w.end <= horizon + 1e-9,
            "AttackSchedule: sensor window outside the horizon");
  }
  for (const SignalAttackWindow& w : actuator_attacks) {
    require(w.target >= 0 && w.target < net.input_dim(),
            "AttackSchedule: actuator target outside the network");
    require(w.start <= w.end && w.end <= horizon + 1e-9,
            "AttackSchedule: actuator window outside the horizon");
  }
  for (const SwitchEvent& e : switch_events) {
    require(e.line >= 0 && e.line < static_cast<int>(net.lines.size()),
            "AttackSchedule: switch target outside the network");
    require(e.time >= 0.0 && e.time <= horizon + 1e-9,
            "AttackSchedule: switch time outside the horizon");
  }
}

AttackSchedule build_case_study_schedule(const CaseStudyTargets& targets) {
  AttackSchedule schedule;
  for (int sensor : targets.sensor_outputs) {
    SignalAttackWindow w;
    w.target = sensor;
    w.start = 0.0;
    w.end = 10.0;
    w.signal = [start = w.start](double t) { return 0.01 * std::cos(0.12 * (t - start)); };
    schedule.sensor_attacks.push_back(std::move(w));
  }
  for (int slot : targets.actuator_slots) {
    SignalAttackWindow w;
    w.target = slot;
    w.start = 10.0;
    w.end = 20.0;
    w.signal = [start = w.start](double t) {
      return 0.1 - 0.6 * std::sin(0.3 * (t - start));
    };
    schedule.actuator_attacks.push_back(std::move(w));
  }
  for (int line : targets.switch_lines) {
    schedule.switch_events.push_back({line, 20.0, false});
    schedule.switch_events.push_back({line, 30.0, true});
  }
  return schedule;
}

SimTrace simulate(const PowerNetwork& net, const AttackSchedule& schedule,
                  const DroopController& controller, const SimOptions& options) {
  net.validate();
  require(options.dt > 0.0 && options.horizon > 0.0, "simulate: dt and horizon");
  require(options.substeps >= 1, "simulate: substeps");
  require(static_cast<int>(options.x0.size()) == net.state_dim(), "simulate: x0 size");
  schedule.validate(net, options.horizon);
  require(static_cast<int>(controller.setpoint.size()) == net.input_dim(),
          "simulate: controller setpoint size");

  const int n = net.state_dim();
  const int m = net.output_dim();
  const int s = net.input_dim();
  const int steps = static_cast<int>(std::llround(options.horizon / options.dt));
  const double h = options.dt / static_cast<double>(options.substeps);

  Rng rng(options.seed);
  std::vector<char> line_closed(net.lines.size(), 1);
  std::vector<SwitchEvent> events = schedule.switch_events;
  std::stable_sort(events.begin(), events.end(),
                   [](const SwitchEvent& a, const SwitchEvent& b) { return a.time < b.time; });
  std::size_t next_event = 0;

  SimTrace trace;
  trace.dt = options.dt;
  std::vector<double> u_times;
  std::vector<Vector> u_values;

  Vector x = options.x0;
  const auto sample = [&](int k) {
    const double t = static_cast<double>(k) * options.dt;
    trace.times.push_back(t);
    trace.states.push_back(x);
    const Vector clean = net.output(x);
    const Vector d_s = schedule.sensor_attack_at(t, m);
    const Vector noise = rng.gaussian_vector_cov(options.measurement_cov);
    trace.clean_outputs.push_back(clean);
    trace.outputs.push_back(clean + d_s + noise);
    trace.sensor_attacks.push_back(d_s);
    trace.actuator_attacks.push_back(schedule.actuator_attack_at(t, s));
    trace.inputs.push_back(controller.command(net, x));
    trace.line_status.emplace_back(line_closed.begin(), line_closed.end());
  };

  sample(0);
  for (int k = 0; k < steps; ++k) {
    Vector held_noise = Vector::Zero(n);
    if (options.injection == NoiseInjection::held_per_sample) {
      held_noise = rng.gaussian_vector_cov(options.process_cov);
    }
    for (int sub = 0; sub < options.substeps; ++sub) {
      const double t = static_cast<double>(k) * options.dt + sub * h;
      // switch toggles snap to the nearest substep boundary
      while (next_event < events.size() && events[next_event].time <= t + 0.5 * h) {
        line_closed[events[next_event].line] = events[next_event].closed ? 1 : 0;
        ++next_event;
      }
      u_times.push_back(t);
      u_values.push_back(controller.command(net, x));

      const auto xdot = [&](const Vector& xi, double ti) -> Vector {
        const Vector u_cmd = controller.command(net, xi);
        const Vector d_a = schedule.actuator_attack_at(ti, s);
        Vector v = net.dynamics(xi, u_cmd + d_a, line_closed);
        if (options.injection == NoiseInjection::held_per_sample) v += held_noise;
        return v;
      };
      const Vector k1 = xdot(x, t);
      const Vector k2 = xdot(x + 0.5 * h * k1, t + 0.5 * h);
      const Vector k3 = xdot(x + 0.5 * h * k2, t + 0.5 * h);
      const Vector k4 = xdot(x + h * k3, t + h);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (options.injection == NoiseInjection::em_substep) {
        x += std::sqrt(h) * rng.gaussian_vector_cov(options.process_cov);
      }
      if (!all_finite(x)) {
        throw DivergenceError("simulate: non-finite state at t=" + std::to_string(t));
      }
    }
    sample(k + 1);
  }
  u_times.push_back(static_cast<double>(steps) * options.dt);
  u_values.push_back(controller.command(net, x));
  trace.input_record = InputSignal(std::move(u_times), std::move(u_values));
  return trace;
}

Vector solve_equilibrium_angles(const PowerNetwork& net, const Vector& setpoint,
                                const std::vector<char>& line_closed) {
  const int nb = net.bus_count();
  Vector injection = Vector::Zero(nb);
  for (int i = 0; i < nb; ++i) {
    injection(i) = -net.buses[i].load;
    if (net.buses[i].is_generator) injection(i) += setpoint(net.input_slot(i));
  }
  require(std::abs(injection.sum()) < 1e-9,
          "solve_equilibrium_angles: generation does not balance load");
  require(net.connected(line_closed),
          "solve_equilibrium_angles: network is disconnected");

  Vector theta = Vector::Zero(nb);
  for (int iter = 0; iter < 100; ++iter) {
    const Vector residual = net.flow_injections(theta, line_closed) - injection;
    if (residual.tail(nb - 1).cwiseAbs().maxCoeff() < 1e-12) return theta;
    // Jacobian of the flow balance, reference angle at bus 0 held fixed.
    Matrix jac = Matrix::Zero(nb, nb);
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
      if (!line_closed[l]) continue;
      const PowerLine& line = net.lines[l];
      const double c = line.susceptance * std::cos(theta(line.from) - theta(line.to));
      jac(line.from, line.from) += c;
      jac(line.from, line.to) -= c;
      jac(line.to, line.to) += c;
      jac(line.to, line.from) -= c;
    }
    const Matrix jr = jac.bottomRightCorner(nb - 1, nb - 1);
    const Vector step = jr.partialPivLu().solve(residual.tail(nb - 1));
    theta.tail(nb - 1) -= step;
    if (!all_finite(theta)) break;
  }
  throw NumericalError("solve_equilibrium_angles: Newton iteration did not converge");
}

std::vector<ModeModel> mode_models_for_network(const PowerNetwork& net,
                                               const std::vector<NetworkModeDef>& defs,
                                               const Matrix& process_cov,
                                               const Matrix& measurement_cov) {
  net.validate();
  const int s = net.input_dim();
  const int m = net.output_dim();
  const int sd = s + m;

  std::vector<ModeModel> models;
  models.reserve(defs.size());
  for (const NetworkModeDef& def : defs) {
    std::vector<char> closed(net.lines.size(), 1);
    for (int l : def.open_lines) {
      require(l >= 0 && l < static_cast<int>(net.lines.size()),
              "mode_models_for_network: open line outside the network");
      closed[l] = 0;
    }
    Matrix k = Matrix::Zero(sd, sd);
    for (int slot : def.attacked_actuator_slots) {
      require(slot >= 0 && slot < s, "mode_models_for_network: actuator slot");
      k(slot, slot) = 1.0;
    }
    for (int out : def.attacked_sensor_outputs) {
      require(out >= 0 && out < m, "mode_models_for_network: sensor output");
      k(s + out, s + out) = 1.0;
    }
    Matrix g = Matrix::Zero(2 * net.bus_count(), sd);
    g.leftCols(s) = net.input_map();
    g = g * k;

    ModeModel model;
    model.mode_id = def.mode_id;
    model.structural_id = def.structural_id;
    model.state_dim = net.state_dim();
    model.input_dim = s;
    model.output_dim = m;
    model.attack_mask = k;
    model.process_cov = process_cov;
    model.measurement_cov = measurement_cov;
    model.constant_cg = true;

    // the hypothesis only admits attacks on its assumed locations
    const Matrix actuator_mask = k.topLeftCorner(s, s);
    model.dynamics = [net, closed, s, actuator_mask](const Vector& x, const Vector& u,
                                                     const Vector& d_loc,
                                                     double) -> Vector {
      return net.dynamics(x, u + actuator_mask * d_loc.head(s), closed);
    };
    model.output = [net](const Vector& x, const Vector&, double) -> Vector {
      return net.output(x);
    };
    model.dynamics_jacobian_state = [net, closed](const Vector& x, const Vector&,
                                                  const Vector&, double) -> Matrix {
      return net.dynamics_jacobian(x, closed);
    };
    model.dynamics_jacobian_attack = [g](const Vector&, const Vector&, const Vector&,
                                         double) -> Matrix { return g; };
    model.output_jacobian_state = [net](const Vector&, const Vector&,
                                        double) -> Matrix {
      return net.output_jacobian();
    };
    model.validate();
    models.push_back(std::move(model));
  }
  return models;
}

LinearPlantData linearize_network(const PowerNetwork& net,
                                  const std::vector<char>& line_closed,
                                  const Vector& x_operating, const Matrix& process_cov,
                                  const Matrix& measurement_cov, double dt) {
  LinearPlantData data;
  data.a = net.dynamics_jacobian(x_operating, line_closed);
  data.c = net.output_jacobian();
  data.attack_input_map = Matrix::Zero(net.state_dim(), net.input_dim() + net.output_dim());
  data.attack_input_map.leftCols(net.input_dim()) = net.input_map();
  data.process_cov = process_cov;
  data.measurement_cov = measurement_cov;
  data.dt = dt;
  data.input_dim = net.input_dim();
  return data;
}

PowerNetwork make_desk9_network(double load_level) {
  PowerNetwork net;
  net.buses.resize(9);
  for (int i = 0; i < 9; ++i) {
    const bool gen = i < 3;
    net.buses[i].is_generator = gen;
    net.buses[i].inertia = gen ? 10.0 : 100.0;
    net.buses[i].damping = 1.0;
    net.buses[i].load = gen ? 0.0 : load_level;
  }
  const int edges[][2] = {{0, 3}, {0, 4}, {1, 4}, {1, 5}, {2, 5}, {2, 6},
                          {3, 6}, {3, 7}, {4, 7}, {4, 8}, {5, 8}, {6, 8}};
  for (const auto& e : edges) {
    net.lines.push_back({e[0], e[1], 1.5});
  }
  return net;
}

PowerNetwork make_large68_network(double load_level) {
  PowerNetwork net;
  const int gens = 16;
  const int total = 68;
  net.buses.resize(total);
  for (int i = 0; i < total; ++i) {
    const bool gen = i < gens;
    net.buses[i].is_generator = gen;
    net.buses[i].inertia = gen ? 10.0 : 100.0;
    net.buses[i].damping = 1.0;
    net.buses[i].load = gen ? 0.0 : load_level;
  }
  // ring over the load buses
  for (int i = gens; i < total; ++i) {
    const int next = (i + 1 - gens) % (total - gens) + gens;
    net.lines.push_back({i, next, 1.5});
  }
  // generator spokes
  for (int g = 0; g < gens; ++g) {
    net.lines.push_back({g, gens + (3 * g) % (total - gens), 1.5});
    net.lines.push_back({g, gens + (3 * g + 13) % (total - gens), 1.5});
  }
  return net;
}

}  // namespace nisme
