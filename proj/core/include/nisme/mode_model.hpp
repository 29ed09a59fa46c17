#ifndef NISME_MODE_MODEL_HPP
#define NISME_MODE_MODEL_HPP

#include <functional>

#include "nisme/types.hpp"

namespace nisme {

// One hypothesis of the switched system: a structural configuration plus an
// assumed set of attacked signal locations.
//
// Signal-attack coordinates are stacked actuator-then-sensor: the attack
// vector d lives in R^{s+m}, its first s entries add to the applied input and
// its last m entries add to the output. The hypothesis is encoded by the
// diagonal 0/1 mask K; the feedthrough used by the output decomposition is
// the bottom m rows of K.
struct ModeModel {
  int mode_id = 0;
  // Modes sharing a structural configuration (e.g. a line-status pattern)
  // carry the same structural_id; the signal-attack-free sibling of a mode is
  // the K == 0 mode with the same structural_id.
  int structural_id = 0;

  int state_dim = 0;   // n
  int input_dim = 0;   // s
  int output_dim = 0;  // m

  // xdot = dynamics(x, u, d_loc, t); d_loc in R^{s+m}, only its actuator block
  // can reach the state.
  std::function<Vector(const Vector&, const Vector&, const Vector&, double)> dynamics;
  // Attack- and noise-free output map y = output(x, u, t).
  std::function<Vector(const Vector&, const Vector&, double)> output;

  // Optional analytic Jacobians; central finite differences fill in when unset.
  std::function<Matrix(const Vector&, const Vector&, const Vector&, double)>
      dynamics_jacobian_state;  // n x n
  std::function<Matrix(const Vector&, const Vector&, const Vector&, double)>
      dynamics_jacobian_attack;  // n x (s+m)
  std::function<Matrix(const Vector&, const Vector&, double)>
      output_jacobian_state;  // m x n

  Matrix attack_mask;      // K, (s+m) x (s+m) diagonal 0/1
  Matrix process_cov;      // per-step Q, n x n, PSD
  Matrix measurement_cov;  // R, m x m, PD

  // Set when the output and attack-input Jacobians do not depend on the
  // evaluation point; the filter then builds the decomposition once.
  bool constant_cg = false;

  int signal_dim() const { return input_dim + output_dim; }
  Matrix feedthrough() const { return attack_mask.bottomRows(output_dim); }
  bool signal_attack_free() const {
    return attack_mask.size() == 0 || attack_mask.cwiseAbs().maxCoeff() == 0.0;
  }

  // Jacobian access with the finite-difference fallback.
  Matrix jac_state(const Vector& x, const Vector& u, const Vector& d_loc, double t) const;
  Matrix jac_attack(const Vector& x, const Vector& u, const Vector& d_loc, double t) const;
  Matrix jac_output(const Vector& x, const Vector& u, double t) const;

  void validate() const;
};

// Central finite-difference Jacobian of fn with respect to x, with step
// sqrt(machine eps) * (1 + |x_i|) per coordinate.
Matrix finite_difference_jacobian(const std::function<Vector(const Vector&)>& fn,
                                  const Vector& x);

// Fully linear time-invariant mode:
//   xdot = a x + b u + g_loc (K d),   y = c x + d_feed u.
// The attack input map defaults to [b | 0] so actuator locations act through
// the input matrix; pass g_loc explicitly to override.
ModeModel make_lti_mode(int mode_id, const Matrix& a, const Matrix& b,
                        const Matrix& c, const Matrix& attack_mask,
                        const Matrix& process_cov, const Matrix& measurement_cov,
                        const Matrix* g_loc = nullptr,
                        const Matrix* output_input_map = nullptr);

}  // namespace nisme

#endif  // NISME_MODE_MODEL_HPP
