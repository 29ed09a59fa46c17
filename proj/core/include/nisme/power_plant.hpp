#ifndef NISME_POWER_PLANT_HPP
#define NISME_POWER_PLANT_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "nisme/input_signal.hpp"
#include "nisme/mode_model.hpp"
#include "nisme/mode_reduction.hpp"
#include "nisme/types.hpp"

namespace nisme {

// Swing-equation network. State layout x = [theta_0..theta_{N-1},
// f_0..f_{N-1}]; outputs grouped per bus as [p_elec_b, theta_b, f_b];
// inputs are the mechanical powers of the generator buses in bus order.
struct PowerBus {
  bool is_generator = false;
  double inertia = 10.0;  // seconds
  double damping = 1.0;
  double load = 0.0;  // known power demand
};

struct PowerLine {
  int from = 0;
  int to = 0;
  double susceptance = 1.5;  // t_il
};

struct PowerNetwork {
  std::vector<PowerBus> buses;
  std::vector<PowerLine> lines;

  int bus_count() const { return static_cast<int>(buses.size()); }
  int state_dim() const { return 2 * bus_count(); }
  int output_dim() const { return 3 * bus_count(); }
  int input_dim() const;                      // number of generator buses
  std::vector<int> generator_buses() const;   // ascending bus ids
  int input_slot(int bus) const;              // -1 for load buses
  bool connected(const std::vector<char>& line_closed) const;
  void validate() const;

  // Line power flows P_il = t_il sin(theta_i - theta_l) summed into each bus.
  Vector flow_injections(const Vector& theta, const std::vector<char>& line_closed) const;

  // xdot of the swing dynamics; u_applied holds the mechanical powers
  // (attacks already added), per generator slot.
  Vector dynamics(const Vector& x, const Vector& u_applied,
                  const std::vector<char>& line_closed) const;
  Vector output(const Vector& x) const;
  Matrix dynamics_jacobian(const Vector& x, const std::vector<char>& line_closed) const;
  Matrix output_jacobian() const;  // constant
  Matrix input_map() const;        // n x s, mechanical power to state
};

// Frequency-droop control: u_g = setpoint_g - kappa * f_g(true state).
struct DroopController {
  Vector setpoint;  // per generator slot
  double kappa = 5.0;

  Vector command(const PowerNetwork& net, const Vector& x) const;
};

struct SignalAttackWindow {
  int target = 0;  // sensor: output component index; actuator: input slot
  double start = 0.0;
  double end = 0.0;  // active on [start, end)
  std::function<double(double)> signal;  // absolute time in, magnitude out
};

struct SwitchEvent {
  int line = 0;
  double time = 0.0;
  bool closed = false;
};

struct AttackSchedule {
  std::vector<SignalAttackWindow> sensor_attacks;
  std::vector<SignalAttackWindow> actuator_attacks;
  std::vector<SwitchEvent> switch_events;

  Vector sensor_attack_at(double t, int output_dim) const;
  Vector actuator_attack_at(double t, int input_dim) const;
  void validate(const PowerNetwork& net, double horizon) const;
};

// The four-phase script: sensor attacks 0.01 cos(0.12 tau) on [0,10),
// actuator attacks 0.1 - 0.6 sin(0.3 tau) on [10,20), line switches opened
// on [20,30), attack-free afterwards; tau counts from each window's start.
struct CaseStudyTargets {
  std::vector<int> sensor_outputs;
  std::vector<int> actuator_slots;
  std::vector<int> switch_lines;
};
AttackSchedule build_case_study_schedule(const CaseStudyTargets& targets);

enum class NoiseInjection {
  // One process-noise draw per sampling period, held across substeps; the
  // per-step discrete covariance seen by a filter is then exactly Q.
  held_per_sample,
  // Independent sqrt(h) * N(0, Q) increments at every integrator substep.
  em_substep,
};

struct SimOptions {
  Vector x0;
  double dt = 0.01;       // sampling period
  double horizon = 40.0;  // seconds
  int substeps = 10;      // integrator substeps per sampling period
  std::uint64_t seed = 0;
  Matrix process_cov;      // n x n
  Matrix measurement_cov;  // m x m
  NoiseInjection injection = NoiseInjection::held_per_sample;
};

struct SimTrace {
  double dt = 0.0;
  std::vector<double> times;             // sampling instants, size steps+1
  std::vector<Vector> states;            // true state at instants
  std::vector<Vector> outputs;           // noisy, attacked y_k
  std::vector<Vector> clean_outputs;     // h(x_k)
  std::vector<Vector> inputs;            // commanded u at instants
  std::vector<Vector> sensor_attacks;    // true d_s at instants
  std::vector<Vector> actuator_attacks;  // true d_a at instants
  std::vector<std::vector<char>> line_status;
  InputSignal input_record;  // substep-resolution commanded input

  int steps() const { return static_cast<int>(times.size()) - 1; }
};

SimTrace simulate(const PowerNetwork& net, const AttackSchedule& schedule,
                  const DroopController& controller, const SimOptions& options);

// Newton solve of the flow balance at f = 0 for the bus phase angles
// (reference angle fixed at bus 0). Injections are setpoint - load.
Vector solve_equilibrium_angles(const PowerNetwork& net, const Vector& setpoint,
                                const std::vector<char>& line_closed);

// One mode hypothesis over the network: a line-status pattern plus assumed
// attack locations.
struct NetworkModeDef {
  int mode_id = 0;
  int structural_id = 0;
  std::vector<int> open_lines;
  std::vector<int> attacked_sensor_outputs;  // output component indices
  std::vector<int> attacked_actuator_slots;  // input slots
};

std::vector<ModeModel> mode_models_for_network(const PowerNetwork& net,
                                               const std::vector<NetworkModeDef>& defs,
                                               const Matrix& process_cov,
                                               const Matrix& measurement_cov);

// Linearization of the swing dynamics about an operating point, for the
// linear mode-reduction machinery.
LinearPlantData linearize_network(const PowerNetwork& net,
                                  const std::vector<char>& line_closed,
                                  const Vector& x_operating, const Matrix& process_cov,
                                  const Matrix& measurement_cov, double dt);

// Signal-location index of a sensor output / actuator slot in the stacked
// actuator-then-sensor coordinates used by AttackLocationSet.
inline int sensor_location(int output_index, int input_dim) {
  return input_dim + output_index;
}
inline int actuator_location(int slot) { return slot; }

// Nine-bus desk-scale network: generators 0-2, loads 3-8, meshed topology,
// paper-valued inertias/damping/susceptance.
PowerNetwork make_desk9_network(double load_level = 0.3);

// Synthetic 68-bus-sized network (16 generators, 52 loads) for scale runs.
PowerNetwork make_large68_network(double load_level = 0.1);

}  // namespace nisme

#endif  // NISME_POWER_PLANT_HPP
