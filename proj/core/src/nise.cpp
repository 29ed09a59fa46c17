#include "nisme/nise.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "nisme/numerics.hpp"

namespace nisme {

namespace {

void check_psd(const Matrix& m, const char* what) {
  if (m.rows() == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-8 * scale) {
    throw NumericalError(std::string(what) + ": covariance lost positive semidefiniteness");
  }
}

void check_pd(const Matrix& m, const char* what) {
  if (m.rows() == 0) return;
  Eigen::LLT<Matrix> llt(symmetrized(m));
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": matrix is not positive definite");
  }
}

Vector rk4_integrate(const std::function<Vector(const Vector&, double)>& f,
                     const Vector& x0, double t0, double dt, int substeps) {
  Vector x = x0;
  const double h = dt / static_cast<double>(substeps);
  double t = t0;
  for (int i = 0; i < substeps; ++i) {
    const Vector k1 = f(x, t);
    const Vector k2 = f(x + 0.5 * h * k1, t + 0.5 * h);
    const Vector k3 = f(x + 0.5 * h * k2, t + 0.5 * h);
    const Vector k4 = f(x + h * k3, t + h);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
  }
  return x;
}

}  // namespace

Vector FilterState::attack_location_estimate() const {
  const int sd = static_cast<int>(v1.rows() > 0 ? v1.rows() : v2.rows());
  Vector out = Vector::Zero(sd);
  if (d1_hat.size() > 0) out += v1 * d1_hat;
  if (d2_hat.size() > 0) out += v2 * d2_hat;
  return out;
}

StepLinearization linearize_step(const FilterState& prev, const ModeModel& model,
                                 const InputSignal& u, double t_prev, double dt) {
  require(dt > 0.0, "linearize_step: dt must be positive");
  StepLinearization lin;
  lin.t_prev = t_prev;
  lin.t_now = t_prev + dt;
  lin.dt = dt;
  lin.u_prev = u.at(t_prev);
  lin.u_now = u.at(lin.t_now);
  lin.d_loc_prev = Vector::Zero(model.signal_dim());
  if (prev.d1_hat.size() > 0) lin.d_loc_prev = prev.v1 * prev.d1_hat;
  lin.a = model.jac_state(prev.x_hat, lin.u_prev, lin.d_loc_prev, t_prev);
  lin.g = model.jac_attack(prev.x_hat, lin.u_prev, lin.d_loc_prev, t_prev);
  lin.x_euler =
      prev.x_hat + dt * model.dynamics(prev.x_hat, lin.u_prev, lin.d_loc_prev, t_prev);
  lin.c = model.jac_output(lin.x_euler, lin.u_now, lin.t_now);
  return lin;
}

DecompositionTransforms build_step_transforms(const ModeModel& model,
                                              const StepLinearization& lin,
                                              double rank_tol) {
  return build_transforms(model.feedthrough(), model.measurement_cov, lin.c, lin.g,
                          rank_tol);
}

D2Estimate estimate_d2(const FilterState& prev, const ModeModel& model,
                       const StepLinearization& lin,
                       const DecompositionTransforms& tr, const Vector& z2,
                       const Matrix& r2) {
  D2Estimate out;
  const int p2 = tr.p2();
  if (p2 == 0) {
    out.d2_hat = Vector::Zero(0);
    out.p_d2 = Matrix::Zero(0, 0);
    return out;
  }
  for (int i = 0; i < p2; ++i) {
    if (tr.sigma_bar(i) <= 0.0 || !std::isfinite(1.0 / tr.sigma_bar(i))) {
      throw NumericalError("estimate_d2: dynamic coupling is numerically singular");
    }
  }
  const double dt = lin.dt;
  const Vector m2_diag = (dt * tr.sigma_bar).cwiseInverse();

  // z2 predicted at the Euler point. The affine input part of the z2 map and
  // the C2 * x term recombine into the full output map evaluated there.
  const Vector pred_z2 = tr.tbar1 * (tr.t2 * model.output(lin.x_euler, lin.u_now, lin.t_now));
  out.d2_hat = m2_diag.asDiagonal() * (z2 - pred_z2);

  const Matrix c2 = tr.tbar1 * tr.t2 * lin.c;
  const Matrix m2c2 = m2_diag.asDiagonal() * c2;
  const Matrix ia = Matrix::Identity(model.state_dim, model.state_dim) + dt * lin.a;
  const Matrix mc_ia = m2c2 * ia;
  const Matrix g1 = lin.g * tr.v1;
  const Matrix c2g1 = c2 * g1;

  const Matrix term1 = mc_ia * prev.p_x * mc_ia.transpose();
  const Matrix term2 = dt * dt * m2c2 * model.process_cov * m2c2.transpose();
  const Matrix term3 =
      m2_diag.asDiagonal() * r2 * m2_diag.asDiagonal();
  const Matrix term4 = dt * dt * c2g1 * prev.p_d1 * c2g1.transpose();
  const Matrix term5 = dt * mc_ia * prev.p_xd1 * c2g1.transpose();
  out.p_d2 = symmetrized(term1 + term2 + term3 + term4 + term5 + term5.transpose());
  return out;
}

StatePrediction predict_state(const FilterState& prev, const ModeModel& model,
                              const StepLinearization& lin,
                              const DecompositionTransforms& tr,
                              const Vector& d2_hat, const InputSignal& u,
                              const Matrix& r2, const NiseConfig& config) {
  const int n = model.state_dim;
  const double dt = lin.dt;
  StatePrediction out;

  const Matrix g2 = lin.g * tr.v2;  // n x p2
  const Vector d_loc = lin.d_loc_prev;
  const auto xdot = [&](const Vector& x, double t) -> Vector {
    Vector v = model.dynamics(x, u.at(t), d_loc, t);
    if (d2_hat.size() > 0) v += g2 * d2_hat;
    return v;
  };
  out.x_pred = rk4_integrate(xdot, prev.x_hat, lin.t_prev, dt,
                             std::max(1, config.integrator_substeps));
  if (!all_finite(out.x_pred)) {
    throw DivergenceError("predict_state: integration produced a non-finite state");
  }

  const Matrix identity = Matrix::Identity(n, n);
  Matrix w_factor = identity;
  Matrix g2m2;  // n x p2
  if (tr.p2() > 0) {
    const Vector m2_diag = (dt * tr.sigma_bar).cwiseInverse();
    const Matrix c2 = tr.tbar1 * tr.t2 * lin.c;
    g2m2 = g2 * m2_diag.asDiagonal();
    w_factor -= dt * g2m2 * c2;
  }

  const Matrix g1 = lin.g * prev.v1;  // n x p1
  const Matrix d1_feedback = g1 * prev.m1c1;
  const Matrix abar = w_factor * (identity + dt * lin.a - dt * d1_feedback);

  const Matrix noise_core = model.process_cov + g1 * prev.m1r1m1 * g1.transpose();
  Matrix qbar = dt * dt * w_factor * noise_core * w_factor.transpose();
  if (tr.p2() > 0) {
    qbar += dt * dt * g2m2 * r2 * g2m2.transpose();
  }

  out.abar = abar;
  out.p_pred = symmetrized(abar * prev.p_x * abar.transpose() + qbar);
  if (config.runtime_checks) check_psd(out.p_pred, "predict_state");
  return out;
}

StateUpdate update_state(const StatePrediction& pred, const ModeModel& model,
                         const StepLinearization& lin,
                         const DecompositionTransforms& tr, const Vector& z3,
                         const Matrix& r3, const NiseConfig& config) {
  StateUpdate out;
  if (tr.p3() == 0) {
    out.x_hat = pred.x_pred;
    out.p_x = pred.p_pred;
    out.innovation = Vector::Zero(0);
    out.innovation_cov = Matrix::Zero(0, 0);
    out.skipped = true;
    return out;
  }
  const Matrix c3 = tr.tbar2 * tr.t2 * lin.c;
  const Matrix s_cov = symmetrized(c3 * pred.p_pred * c3.transpose() + r3);
  Eigen::LLT<Matrix> llt(s_cov);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("update_state: innovation covariance is not positive definite");
  }
  const Matrix gain = llt.solve(c3 * pred.p_pred).transpose();  // n x p3

  const Vector pred_z3 =
      tr.tbar2 * (tr.t2 * model.output(pred.x_pred, lin.u_now, lin.t_now));
  out.innovation = z3 - pred_z3;
  out.innovation_cov = s_cov;
  out.x_hat = pred.x_pred + gain * out.innovation;
  if (!all_finite(out.x_hat)) {
    throw DivergenceError("update_state: non-finite state estimate");
  }
  const Matrix ilc =
      Matrix::Identity(model.state_dim, model.state_dim) - gain * c3;
  out.p_x = symmetrized(ilc * pred.p_pred * ilc.transpose() +
                        gain * r3 * gain.transpose());
  if (config.runtime_checks) check_psd(out.p_x, "update_state");
  return out;
}

D1Estimate estimate_d1(const Vector& x_hat, const Matrix& p_x,
                       const ModeModel& model, const StepLinearization& lin,
                       const DecompositionTransforms& tr, const Vector& z1,
                       const Matrix& r1) {
  D1Estimate out;
  const int n = model.state_dim;
  const int p1 = tr.p1();
  if (p1 == 0) {
    out.d1_hat = Vector::Zero(0);
    out.p_d1 = Matrix::Zero(0, 0);
    out.p_xd1 = Matrix::Zero(n, 0);
    out.m1c1 = Matrix::Zero(0, n);
    out.m1r1m1 = Matrix::Zero(0, 0);
    return out;
  }
  for (int i = 0; i < p1; ++i) {
    if (tr.sigma(i) <= 0.0 || !std::isfinite(1.0 / tr.sigma(i))) {
      throw NumericalError("estimate_d1: feedthrough is numerically singular");
    }
  }
  const Vector m1_diag = tr.sigma.cwiseInverse();
  const Vector h1 = tr.t1 * model.output(x_hat, lin.u_now, lin.t_now);
  out.d1_hat = m1_diag.asDiagonal() * (z1 - h1);

  const Matrix c1 = tr.t1 * lin.c;
  out.m1c1 = m1_diag.asDiagonal() * c1;
  out.m1r1m1 = m1_diag.asDiagonal() * r1 * m1_diag.asDiagonal();
  out.p_d1 = symmetrized(out.m1c1 * p_x * out.m1c1.transpose() + out.m1r1m1);
  out.p_xd1 = -p_x * out.m1c1.transpose();
  return out;
}

LikelihoodResult innovation_likelihood(const Vector& innovation,
                                       const Matrix& innovation_cov,
                                       double rank_tol) {
  LikelihoodResult out;
  if (innovation.size() == 0) {
    return out;  // degenerate: uninformative likelihood of 1
  }
  constexpr double kLog2Pi = 1.8378770664093453;
  // definite covariances (the usual case) take the Cholesky route; the
  // pseudo-inverse/pseudo-determinant handles rank deficiency
  Eigen::LLT<Matrix> llt(symmetrized(innovation_cov));
  if (llt.info() == Eigen::Success) {
    double log_det = 0.0;
    const auto& l = llt.matrixLLT();
    bool well_scaled = true;
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
      if (l(i, i) <= 0.0) {
        well_scaled = false;
        break;
      }
      log_det += 2.0 * std::log(l(i, i));
    }
    if (well_scaled) {
      const double quad = innovation.dot(llt.solve(innovation));
      out.rank = static_cast<int>(innovation.size());
      out.log_value =
          -0.5 * (quad + static_cast<double>(out.rank) * kLog2Pi + log_det);
      out.value = std::exp(std::max(out.log_value, -700.0));
      return out;
    }
  }
  const PseudoInverse p = pinv_det_log(innovation_cov, rank_tol);
  const double quad = innovation.dot(p.pinv * innovation);
  out.rank = p.rank;
  out.log_value =
      -0.5 * (quad + static_cast<double>(p.rank) * kLog2Pi + p.log_pseudo_det);
  out.value = std::exp(std::max(out.log_value, -700.0));
  return out;
}

NiseFilter::NiseFilter(const ModeModel& model, NiseConfig config)
    : model_(&model), config_(config) {
  model.validate();
}

const DecompositionTransforms& NiseFilter::transforms(
    const StepLinearization& lin) const {
  if (model_->constant_cg) {
    if (!cached_) cached_ = build_step_transforms(*model_, lin, config_.rank_tol);
    return *cached_;
  }
  scratch_ = build_step_transforms(*model_, lin, config_.rank_tol);
  return *scratch_;
}

FilterState NiseFilter::init(const Vector& x0, const Matrix& p0, const Vector& y0,
                             const Vector& u0) const {
  const ModeModel& model = *model_;
  require(static_cast<int>(x0.size()) == model.state_dim, "init: x0 dimension");
  require(p0.rows() == model.state_dim && p0.cols() == model.state_dim,
          "init: P0 dimension");
  require(static_cast<int>(y0.size()) == model.output_dim, "init: y0 dimension");

  StepLinearization lin;
  lin.t_prev = 0.0;
  lin.t_now = 0.0;
  lin.dt = 0.0;
  lin.u_prev = u0;
  lin.u_now = u0;
  lin.d_loc_prev = Vector::Zero(model.signal_dim());
  lin.a = model.jac_state(x0, u0, lin.d_loc_prev, 0.0);
  lin.g = model.jac_attack(x0, u0, lin.d_loc_prev, 0.0);
  lin.x_euler = x0;
  lin.c = model.jac_output(x0, u0, 0.0);

  const DecompositionTransforms& tr = transforms(lin);
  const DecomposedNoise noise = decompose_noise(model.measurement_cov, tr);

  FilterState state;
  state.x_hat = x0;
  state.p_x = symmetrized(p0);
  state.v1 = tr.v1;
  state.v2 = Matrix::Zero(model.signal_dim(), 0);
  state.d2_hat = Vector::Zero(0);
  state.p_d2 = Matrix::Zero(0, 0);
  state.step = 0;

  const Vector z1 = tr.t1 * y0;
  const D1Estimate d1 = estimate_d1(x0, state.p_x, model, lin, tr, z1, noise.r1);
  state.d1_hat = d1.d1_hat;
  state.p_d1 = d1.p_d1;
  state.p_xd1 = d1.p_xd1;
  state.m1c1 = d1.m1c1;
  state.m1r1m1 = d1.m1r1m1;
  return state;
}

StepOutput NiseFilter::step(const FilterState& prev, const Vector& y,
                            const InputSignal& u, double t_prev, double dt) const {
  const ModeModel& model = *model_;
  require(static_cast<int>(y.size()) == model.output_dim, "step: y dimension");

  const StepLinearization lin = linearize_step(prev, model, u, t_prev, dt);
  const DecompositionTransforms& tr = transforms(lin);
  const DecomposedOutput z = decompose_output(y, tr);
  const DecomposedNoise noise = decompose_noise(model.measurement_cov, tr);
  if (config_.runtime_checks) {
    check_pd(noise.r1, "step: R1");
    check_pd(noise.r2, "step: R2");
    check_pd(noise.r3, "step: R3");
  }

  const D2Estimate d2 = estimate_d2(prev, model, lin, tr, z.z2, noise.r2);
  const StatePrediction pred =
      predict_state(prev, model, lin, tr, d2.d2_hat, u, noise.r2, config_);
  const StateUpdate upd = update_state(pred, model, lin, tr, z.z3, noise.r3, config_);
  const D1Estimate d1 =
      estimate_d1(upd.x_hat, upd.p_x, model, lin, tr, z.z1, noise.r1);

  StepOutput out;
  out.state.x_hat = upd.x_hat;
  out.state.p_x = upd.p_x;
  out.state.d1_hat = d1.d1_hat;
  out.state.p_d1 = d1.p_d1;
  out.state.p_xd1 = d1.p_xd1;
  out.state.d2_hat = d2.d2_hat;
  out.state.p_d2 = d2.p_d2;
  out.state.v1 = tr.v1;
  out.state.v2 = tr.v2;
  out.state.m1c1 = d1.m1c1;
  out.state.m1r1m1 = d1.m1r1m1;
  out.state.step = prev.step + 1;
  out.state.update_skipped = upd.skipped;

  out.innovation = upd.innovation;
  out.innovation_cov = upd.innovation_cov;
  if (upd.skipped) {
    out.degenerate_output = true;
    out.log_likelihood = 0.0;
    out.likelihood = 1.0;
    out.likelihood_rank = 0;
  } else {
    const LikelihoodResult lik =
        innovation_likelihood(upd.innovation, upd.innovation_cov, config_.rank_tol);
    out.log_likelihood = lik.log_value;
    out.likelihood = lik.value;
    out.likelihood_rank = lik.rank;
  }
  return out;
}

}  // namespace nisme
