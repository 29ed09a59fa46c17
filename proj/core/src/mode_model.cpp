#include "nisme/mode_model.hpp"

#include <cmath>

namespace nisme {

Matrix finite_difference_jacobian(const std::function<Vector(const Vector&)>& fn,
                                  const Vector& x) {
  const double sqrt_eps = std::sqrt(2.220446049250313e-16);
  const Vector f0 = fn(x);
  Matrix jac(f0.size(), x.size());
  Vector xp = x;
  Vector xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = sqrt_eps * (1.0 + std::abs(x(i)));
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    jac.col(i) = (fn(xp) - fn(xm)) / (2.0 * h);
    xp(i) = x(i);
    xm(i) = x(i);
  }
  return jac;
}

Matrix ModeModel::jac_state(const Vector& x, const Vector& u, const Vector& d_loc,
                            double t) const {
  if (dynamics_jacobian_state) return dynamics_jacobian_state(x, u, d_loc, t);
  return finite_difference_jacobian(
      [&](const Vector& xi) { return dynamics(xi, u, d_loc, t); }, x);
}

Matrix ModeModel::jac_attack(const Vector& x, const Vector& u, const Vector& d_loc,
                             double t) const {
  if (dynamics_jacobian_attack) return dynamics_jacobian_attack(x, u, d_loc, t);
  return finite_difference_jacobian(
      [&](const Vector& di) { return dynamics(x, u, di, t); }, d_loc);
}

Matrix ModeModel::jac_output(const Vector& x, const Vector& u, double t) const {
  if (output_jacobian_state) return output_jacobian_state(x, u, t);
  return finite_difference_jacobian(
      [&](const Vector& xi) { return output(xi, u, t); }, x);
}

void ModeModel::validate() const {
  require(state_dim > 0 && output_dim > 0 && input_dim >= 0,
          "ModeModel: dimensions must be positive");
  require(static_cast<bool>(dynamics) && static_cast<bool>(output),
          "ModeModel: dynamics and output maps are required");
  const int sd = signal_dim();
  require(attack_mask.rows() == sd && attack_mask.cols() == sd,
          "ModeModel: attack mask must be (s+m) x (s+m)");
  for (int i = 0; i < sd; ++i) {
    for (int j = 0; j < sd; ++j) {
      const double v = attack_mask(i, j);
      if (i == j) {
        require(v == 0.0 || v == 1.0, "ModeModel: attack mask diagonal must be 0/1");
      } else {
        require(v == 0.0, "ModeModel: attack mask must be diagonal");
      }
    }
  }
  require(process_cov.rows() == state_dim && process_cov.cols() == state_dim,
          "ModeModel: process covariance must be n x n");
  require(measurement_cov.rows() == output_dim && measurement_cov.cols() == output_dim,
          "ModeModel: measurement covariance must be m x m");
  Eigen::LLT<Matrix> llt(symmetrized(measurement_cov));
  require(llt.info() == Eigen::Success,
          "ModeModel: measurement covariance must be positive definite");
}

ModeModel make_lti_mode(int mode_id, const Matrix& a, const Matrix& b,
                        const Matrix& c, const Matrix& attack_mask,
                        const Matrix& process_cov, const Matrix& measurement_cov,
                        const Matrix* g_loc, const Matrix* output_input_map) {
  const int n = static_cast<int>(a.rows());
  const int s = static_cast<int>(b.cols());
  const int m = static_cast<int>(c.rows());

  ModeModel model;
  model.mode_id = mode_id;
  model.state_dim = n;
  model.input_dim = s;
  model.output_dim = m;

  Matrix g = Matrix::Zero(n, s + m);
  if (g_loc != nullptr) {
    g = *g_loc;
  } else {
    g.leftCols(s) = b;
  }
  g = g * attack_mask;  // hypothesis masks the unattacked locations

  Matrix d_feed = Matrix::Zero(m, s);
  if (output_input_map != nullptr) d_feed = *output_input_map;

  model.dynamics = [a, b, g](const Vector& x, const Vector& u, const Vector& d_loc,
                             double) -> Vector { return a * x + b * u + g * d_loc; };
  model.output = [c, d_feed](const Vector& x, const Vector& u, double) -> Vector {
    return c * x + d_feed * u;
  };
  model.dynamics_jacobian_state = [a](const Vector&, const Vector&, const Vector&,
                                      double) { return a; };
  model.dynamics_jacobian_attack = [g](const Vector&, const Vector&, const Vector&,
                                       double) { return g; };
  model.output_jacobian_state = [c](const Vector&, const Vector&, double) { return c; };

  model.attack_mask = attack_mask;
  model.process_cov = process_cov;
  model.measurement_cov = measurement_cov;
  model.constant_cg = true;
  model.validate();
  return model;
}

}  // namespace nisme
