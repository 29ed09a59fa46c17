#ifndef NISME_NISE_HPP
#define NISME_NISE_HPP

#include <optional>

#include "nisme/decomposition.hpp"
#include "nisme/input_signal.hpp"
#include "nisme/mode_model.hpp"
#include "nisme/types.hpp"

namespace nisme {

struct NiseConfig {
  double rank_tol = kRankTol;
  int integrator_substeps = 1;  // RK4 substeps per sampling period
  bool runtime_checks = true;   // covariance definiteness assertions per step
};

// Recursion state of one mode's estimator. d2_hat always refers to the
// previous sampling instant (it is estimated one step late, from z2).
struct FilterState {
  Vector x_hat;   // filtered state
  Matrix p_x;     // its covariance
  Vector d1_hat;  // feedthrough attack component, current instant
  Matrix p_d1;
  Matrix p_xd1;   // cross covariance state/d1
  Vector d2_hat;  // dynamics attack component, previous instant
  Matrix p_d2;
  Matrix v1;      // (s+m) x p1 basis of d1_hat in signal coordinates
  Matrix v2;      // (s+m) x |d2_hat| basis of d2_hat
  Matrix m1c1;    // M1*C1 of the step that produced d1_hat (feeds the next
                  // step's prediction covariance)
  Matrix m1r1m1;  // M1*R1*M1^T of that step
  int step = 0;
  bool update_skipped = false;  // last step had no attack-free output part

  // Attack estimate lifted to stacked actuator-then-sensor coordinates.
  Vector attack_location_estimate() const;
};

struct StepOutput {
  FilterState state;
  Vector innovation;      // on the attack-free output part
  Matrix innovation_cov;  // positive definite when p3 > 0
  double log_likelihood = 0.0;
  double likelihood = 1.0;
  int likelihood_rank = 0;
  bool degenerate_output = false;  // p3 == 0: likelihood is uninformative
};

// Shared per-step linearization. The output Jacobian is taken at the Euler
// prediction of the state (the only point available before the attack
// estimate exists); for linear output maps this is exact.
struct StepLinearization {
  Vector x_euler;     // x_hat + dt * f(x_hat, u_prev, d1, t_prev)
  Vector d_loc_prev;  // v1 * d1_hat, the lifted feedthrough attack estimate
  Matrix a;           // df/dx at the previous filtered state
  Matrix g;           // df/dd at the previous filtered state
  Matrix c;           // dh/dx at x_euler
  Vector u_prev;
  Vector u_now;
  double t_prev = 0.0;
  double t_now = 0.0;
  double dt = 0.0;
};

StepLinearization linearize_step(const FilterState& prev, const ModeModel& model,
                                 const InputSignal& u, double t_prev, double dt);

DecompositionTransforms build_step_transforms(const ModeModel& model,
                                              const StepLinearization& lin,
                                              double rank_tol = kRankTol);

struct D2Estimate {
  Vector d2_hat;
  Matrix p_d2;
};

// Estimate the previous instant's dynamics attack from z2. Empty estimate
// when the dynamic coupling has rank zero.
D2Estimate estimate_d2(const FilterState& prev, const ModeModel& model,
                       const StepLinearization& lin,
                       const DecompositionTransforms& tr, const Vector& z2,
                       const Matrix& r2);

struct StatePrediction {
  Vector x_pred;
  Matrix p_pred;
  Matrix abar;  // closed-loop transition used for the covariance propagation
};

// Integrate the dynamics with the attack estimates held constant over the
// sampling interval and propagate the covariance.
StatePrediction predict_state(const FilterState& prev, const ModeModel& model,
                              const StepLinearization& lin,
                              const DecompositionTransforms& tr,
                              const Vector& d2_hat, const InputSignal& u,
                              const Matrix& r2, const NiseConfig& config);

struct StateUpdate {
  Vector x_hat;
  Matrix p_x;
  Vector innovation;
  Matrix innovation_cov;
  bool skipped = false;  // p3 == 0
};

// Correct the prediction with the attack-free output part (Joseph form).
StateUpdate update_state(const StatePrediction& pred, const ModeModel& model,
                         const StepLinearization& lin,
                         const DecompositionTransforms& tr, const Vector& z3,
                         const Matrix& r3, const NiseConfig& config);

struct D1Estimate {
  Vector d1_hat;
  Matrix p_d1;
  Matrix p_xd1;
  Matrix m1c1;
  Matrix m1r1m1;
};

D1Estimate estimate_d1(const Vector& x_hat, const Matrix& p_x,
                       const ModeModel& model, const StepLinearization& lin,
                       const DecompositionTransforms& tr, const Vector& z1,
                       const Matrix& r1);

struct LikelihoodResult {
  double log_value = 0.0;
  double value = 1.0;
  int rank = 0;
};

// Gaussian innovation likelihood on the numerical rank of its covariance,
// computed in log space and exponentiated with an underflow clamp.
LikelihoodResult innovation_likelihood(const Vector& innovation,
                                       const Matrix& innovation_cov,
                                       double rank_tol = kRankTol);

// One mode's recursive estimator: composes the stages above in order.
class NiseFilter {
 public:
  explicit NiseFilter(const ModeModel& model, NiseConfig config = {});

  FilterState init(const Vector& x0, const Matrix& p0, const Vector& y0,
                   const Vector& u0) const;

  StepOutput step(const FilterState& prev, const Vector& y, const InputSignal& u,
                  double t_prev, double dt) const;

  const ModeModel& model() const { return *model_; }
  const NiseConfig& config() const { return config_; }

 private:
  const DecompositionTransforms& transforms(const StepLinearization& lin) const;

  const ModeModel* model_;
  NiseConfig config_;
  mutable std::optional<DecompositionTransforms> cached_;  // when constant_cg
  mutable std::optional<DecompositionTransforms> scratch_;
};

}  // namespace nisme

#endif  // NISME_NISE_HPP
