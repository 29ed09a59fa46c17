#include <doctest.h>

#include <cmath>

#include "nisme/mode_model.hpp"
#include "nisme/power_plant.hpp"
#include "nisme/rng.hpp"
#include "support/oracles.hpp"

using namespace nisme;

namespace {

SimOptions quiet_options(const PowerNetwork& net, double horizon, std::uint64_t seed,
                         double q_scale, double r_scale) {
  SimOptions options;
  options.x0 = Vector::Zero(net.state_dim());
  options.dt = 0.01;
  options.horizon = horizon;
  options.substeps = 10;
  options.seed = seed;
  options.process_cov = q_scale * Matrix::Identity(net.state_dim(), net.state_dim());
  options.measurement_cov = r_scale * Matrix::Identity(net.output_dim(), net.output_dim());
  return options;
}

}  // namespace

TEST_CASE("equilibrium initial state stays put without noise and attacks") {
  const PowerNetwork net = make_desk9_network();
  DroopController controller;
  controller.kappa = 5.0;
  controller.setpoint = Vector::Constant(net.input_dim(), 0.6);  // 6 loads * 0.3 / 3
  const std::vector<char> closed(net.lines.size(), 1);
  const Vector theta = solve_equilibrium_angles(net, controller.setpoint, closed);

  SimOptions options = quiet_options(net, 2.0, 1, 1e-300, 1e-300);
  options.x0.head(net.bus_count()) = theta;
  const SimTrace trace = simulate(net, {}, controller, options);
  for (const Vector& x : trace.states) {
    CHECK((x - options.x0).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("opening a line zeroes its flow term") {
  PowerNetwork net;
  net.buses.resize(2);
  net.buses[0] = {true, 10.0, 1.0, 0.0};
  net.buses[1] = {true, 10.0, 1.0, 0.0};
  net.lines.push_back({0, 1, 1.5});
  Vector theta(2);
  theta << 0.4, -0.2;
  const Vector closed_flows = net.flow_injections(theta, {1});
  CHECK(closed_flows(0) == doctest::Approx(1.5 * std::sin(0.6)));
  CHECK(closed_flows(0) == doctest::Approx(-closed_flows(1)));  // antisymmetry
  const Vector open_flows = net.flow_injections(theta, {0});
  CHECK(open_flows.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("paper parameter set keeps trajectories bounded over 40 s") {
  const PowerNetwork net = make_desk9_network();
  DroopController controller;
  controller.kappa = 5.0;
  controller.setpoint = Vector::Constant(net.input_dim(), 0.6);
  const std::vector<char> closed(net.lines.size(), 1);

  SimOptions options = quiet_options(net, 40.0, 7, 1e-4, 1e-8);
  options.x0.head(net.bus_count()) =
      solve_equilibrium_angles(net, controller.setpoint, closed);

  CaseStudyTargets targets;
  targets.sensor_outputs = {9, 15, 21};
  targets.actuator_slots = {0, 1, 2};
  targets.switch_lines = {0, 5};
  const AttackSchedule schedule = build_case_study_schedule(targets);
  const SimTrace trace = simulate(net, schedule, controller, options);
  double max_norm = 0.0;
  for (const Vector& x : trace.states) {
    max_norm = std::max(max_norm, x.cwiseAbs().maxCoeff());
  }
  CHECK(max_norm < 5.0);
  CHECK(trace.steps() == 4000);
}

TEST_CASE("case-study schedule phases and signal values") {
  CaseStudyTargets targets;
  targets.sensor_outputs = {9};
  targets.actuator_slots = {0};
  targets.switch_lines = {7};
  const AttackSchedule schedule = build_case_study_schedule(targets);

  REQUIRE(schedule.sensor_attacks.size() == 1);
  CHECK(schedule.sensor_attacks[0].start == 0.0);
  CHECK(schedule.sensor_attacks[0].end == 10.0);
  CHECK(schedule.sensor_attacks[0].signal(0.0) == doctest::Approx(0.01));
  REQUIRE(schedule.actuator_attacks.size() == 1);
  CHECK(schedule.actuator_attacks[0].start == 10.0);
  CHECK(schedule.actuator_attacks[0].end == 20.0);
  CHECK(schedule.actuator_attacks[0].signal(10.0) == doctest::Approx(0.1));
  REQUIRE(schedule.switch_events.size() == 2);
  CHECK(schedule.switch_events[0].time == 20.0);
  CHECK_FALSE(schedule.switch_events[0].closed);
  CHECK(schedule.switch_events[1].time == 30.0);
  CHECK(schedule.switch_events[1].closed);

  // activity windows are half-open
  CHECK(schedule.sensor_attack_at(0.0, 30)(9) == doctest::Approx(0.01));
  CHECK(schedule.sensor_attack_at(10.0, 30)(9) == 0.0);
  CHECK(schedule.actuator_attack_at(9.99, 3)(0) == 0.0);
  CHECK(schedule.actuator_attack_at(10.0, 3)(0) == doctest::Approx(0.1));

  const PowerNetwork net = make_desk9_network();
  CaseStudyTargets bad;
  bad.sensor_outputs = {999};
  AttackSchedule broken = build_case_study_schedule(bad);
  CHECK_THROWS_AS(broken.validate(net, 40.0), DomainError);
}

TEST_CASE("network mode models carry analytic Jacobians that match differences") {
  const PowerNetwork net = make_desk9_network();
  NetworkModeDef def;
  def.mode_id = 2;
  def.attacked_actuator_slots = {0, 2};
  def.attacked_sensor_outputs = {9};
  def.open_lines = {7};
  const int n = net.state_dim();
  const Matrix q = 1e-4 * Matrix::Identity(n, n);
  const Matrix r = 1e-8 * Matrix::Identity(net.output_dim(), net.output_dim());
  const ModeModel model = mode_models_for_network(net, {def}, q, r)[0];

  Rng rng(9);
  const Vector x = 0.3 * rng.gaussian_vector(n);
  const Vector u = rng.gaussian_vector(net.input_dim());
  const Vector d = Vector::Zero(model.signal_dim());

  const Matrix a_analytic = model.dynamics_jacobian_state(x, u, d, 0.0);
  const Matrix a_fd = finite_difference_jacobian(
      [&](const Vector& xi) { return model.dynamics(xi, u, d, 0.0); }, x);
  CHECK((a_analytic - a_fd).cwiseAbs().maxCoeff() < 1e-6);

  const Matrix g_analytic = model.dynamics_jacobian_attack(x, u, d, 0.0);
  const Matrix g_fd = finite_difference_jacobian(
      [&](const Vector& di) { return model.dynamics(x, u, di, 0.0); }, d);
  CHECK((g_analytic - g_fd).cwiseAbs().maxCoeff() < 1e-6);

  const Matrix c_analytic = model.output_jacobian_state(x, u, 0.0);
  const Matrix c_fd = finite_difference_jacobian(
      [&](const Vector& xi) { return model.output(xi, u, 0.0); }, x);
  CHECK((c_analytic - c_fd).cwiseAbs().maxCoeff() < 1e-6);

  // the hypothesis masks unattacked locations out of the attack map
  CHECK(g_analytic.col(1).cwiseAbs().maxCoeff() == 0.0);   // actuator 1 clean
  CHECK(g_analytic.col(0).cwiseAbs().maxCoeff() > 0.0);

  // attack-free mode on a two-bus network is a plain EKF model
  PowerNetwork two;
  two.buses.resize(2);
  two.buses[0] = {true, 10.0, 1.0, 0.0};
  two.buses[1] = {false, 100.0, 1.0, 0.0};
  two.lines.push_back({0, 1, 1.5});
  NetworkModeDef free_def;
  const ModeModel free_mode = mode_models_for_network(
      two, {free_def}, 1e-4 * Matrix::Identity(4, 4), 1e-8 * Matrix::Identity(6, 6))[0];
  CHECK(free_mode.signal_attack_free());
  CHECK(free_mode.feedthrough().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("seeded traces are bitwise reproducible") {
  const PowerNetwork net = make_desk9_network();
  DroopController controller;
  controller.kappa = 5.0;
  controller.setpoint = Vector::Constant(net.input_dim(), 0.6);
  const std::vector<char> closed(net.lines.size(), 1);
  SimOptions options = quiet_options(net, 1.0, 99, 1e-4, 1e-8);
  options.x0.head(net.bus_count()) =
      solve_equilibrium_angles(net, controller.setpoint, closed);

  const SimTrace a = simulate(net, {}, controller, options);
  const SimTrace b = simulate(net, {}, controller, options);
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    CHECK((a.states[k] - b.states[k]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.outputs[k] - b.outputs[k]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("process noise draws match the configured covariance") {
  Rng rng(123);
  Matrix q(2, 2);
  q << 2e-4, 0.5e-4, 0.5e-4, 1e-4;
  const int draws = 100000;
  Matrix sum = Matrix::Zero(2, 2);
  for (int i = 0; i < draws; ++i) {
    const Vector w = rng.gaussian_vector_cov(q);
    sum += w * w.transpose();
  }
  const Matrix sample_cov = sum / draws;
  CHECK((sample_cov - q).norm() <= 0.05 * q.norm());
}

TEST_CASE("sampled outputs depend only on the instant's state, noise and attack") {
  // re-simulating with the same seed but a different horizon leaves the
  // earlier samples untouched; y_k is a function of x(t_k), v_k, d_s(t_k)
  const PowerNetwork net = make_desk9_network();
  DroopController controller;
  controller.kappa = 5.0;
  controller.setpoint = Vector::Constant(net.input_dim(), 0.6);
  const std::vector<char> closed(net.lines.size(), 1);
  SimOptions options = quiet_options(net, 0.5, 5, 1e-4, 1e-8);
  options.x0.head(net.bus_count()) =
      solve_equilibrium_angles(net, controller.setpoint, closed);
  const SimTrace trace = simulate(net, {}, controller, options);
  for (int k = 0; k <= trace.steps(); ++k) {
    const Vector clean = net.output(trace.states[k]);
    CHECK((trace.clean_outputs[k] - clean).cwiseAbs().maxCoeff() == 0.0);
    const Vector residual = trace.outputs[k] - clean - trace.sensor_attacks[k];
    // what remains is exactly the measurement noise: zero-mean, R-sized
    CHECK(residual.cwiseAbs().maxCoeff() < 1e-3);
  }
}

TEST_CASE("input signals interpolate linearly and clamp at the ends") {
  Vector a(1), b(1);
  a << 1.0;
  b << 3.0;
  const InputSignal sig({0.0, 1.0}, {a, b});
  CHECK(sig.at(-1.0)(0) == 1.0);
  CHECK(sig.at(0.5)(0) == doctest::Approx(2.0));
  CHECK(sig.at(2.0)(0) == 3.0);
  CHECK(sig.dim() == 1);
  const InputSignal flat = InputSignal::constant(b);
  CHECK(flat.at(123.0)(0) == 3.0);
  CHECK_THROWS_AS(InputSignal({0.0, 0.0}, {a, b}), DomainError);
}

TEST_CASE("substep noise increments are an alternative injection scheme") {
  const PowerNetwork net = make_desk9_network();
  DroopController controller;
  controller.kappa = 5.0;
  controller.setpoint = Vector::Constant(net.input_dim(), 0.6);
  const std::vector<char> closed(net.lines.size(), 1);
  SimOptions options = quiet_options(net, 1.0, 31, 1e-4, 1e-8);
  options.x0.head(net.bus_count()) =
      solve_equilibrium_angles(net, controller.setpoint, closed);
  options.injection = NoiseInjection::em_substep;
  const SimTrace em = simulate(net, {}, controller, options);
  options.injection = NoiseInjection::held_per_sample;
  const SimTrace held = simulate(net, {}, controller, options);
  double max_dev = 0.0;
  for (const Vector& x : em.states) {
    max_dev = std::max(max_dev, (x - options.x0).cwiseAbs().maxCoeff());
  }
  CHECK(max_dev > 0.0);
  CHECK(max_dev < 0.5);  // bounded jitter around the equilibrium
  // the two schemes draw differently
  CHECK((em.states.back() - held.states.back()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("network presets are connected, also after the scripted switch attacks") {
  const PowerNetwork desk = make_desk9_network();
  desk.validate();
  CHECK(desk.bus_count() == 9);
  CHECK(desk.input_dim() == 3);
  std::vector<char> closed(desk.lines.size(), 1);
  CHECK(desk.connected(closed));
  closed[0] = 0;
  closed[5] = 0;
  CHECK(desk.connected(closed));

  const PowerNetwork large = make_large68_network();
  large.validate();
  CHECK(large.bus_count() == 68);
  CHECK(large.input_dim() == 16);
  CHECK(large.connected(std::vector<char>(large.lines.size(), 1)));
}
