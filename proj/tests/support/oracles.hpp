// Independent reference implementations used to freeze expected values in
// tests. Nothing here may call into the code paths it checks.

#ifndef NISME_TESTS_ORACLES_HPP
#define NISME_TESTS_ORACLES_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "nisme/rng.hpp"
#include "nisme/types.hpp"

namespace oracles {

using nisme::Matrix;
using nisme::Vector;

// Composite Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int panels = 4000) {
  const double h = (b - a) / (2.0 * panels);
  double sum = f(a) + f(b);
  for (int i = 1; i < 2 * panels; ++i) {
    sum += f(a + i * h) * ((i % 2) ? 4.0 : 2.0);
  }
  return sum * h / 3.0;
}

// Chi-square CDF by direct quadrature of the density. The df = 1 density has
// an integrable singularity at zero, removed by the substitution t = u^2.
inline double chi_square_cdf(int df, double x) {
  if (x <= 0.0) return 0.0;
  if (df == 1) {
    const auto normal_pdf = [](double u) {
      return std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI);
    };
    return 2.0 * simpson(normal_pdf, 0.0, std::sqrt(x));
  }
  const double a = 0.5 * df;
  const double log_norm = -a * std::log(2.0) - std::lgamma(a);
  const auto pdf = [&](double t) {
    if (t <= 0.0) return 0.0;
    return std::exp(log_norm + (a - 1.0) * std::log(t) - 0.5 * t);
  };
  return simpson(pdf, 0.0, x);
}

// Two-tailed standard normal coverage by quadrature of the density.
inline double normal_two_tailed_coverage(double z) {
  const auto pdf = [](double t) {
    return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
  };
  return 2.0 * simpson(pdf, 0.0, z);
}

// Plain Gauss-Jordan inverse (partial pivoting), for pseudo-inverse checks
// on well-conditioned SPD matrices.
inline Matrix dense_inverse(Matrix a) {
  const int n = static_cast<int>(a.rows());
  Matrix inv = Matrix::Identity(n, n);
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    }
    a.row(col).swap(a.row(pivot));
    inv.row(col).swap(inv.row(pivot));
    const double p = a(col, col);
    a.row(col) /= p;
    inv.row(col) /= p;
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = a(r, col);
      a.row(r) -= factor * a.row(col);
      inv.row(r) -= factor * inv.row(col);
    }
  }
  return inv;
}

inline Matrix random_matrix(nisme::Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  }
  return m;
}

inline Matrix random_spd(nisme::Rng& rng, int n, double ridge = 0.5) {
  const Matrix a = random_matrix(rng, n, n);
  return Matrix(a * a.transpose() + ridge * Matrix::Identity(n, n));
}

// Textbook continuous-discrete extended Kalman filter: the state prediction
// integrates the drift with its own RK4, the covariance propagates through
// the first-order transition I + dt*A, and the update is the standard (non
// Joseph) Kalman correction.
struct CdKalman {
  Matrix a;  // continuous-time state matrix
  Matrix b;  // input matrix
  Matrix c;  // output matrix
  Matrix q;  // per-step process covariance (enters as dt^2 q)
  Matrix r;  // measurement covariance

  Vector x;
  Matrix p;

  void predict(const Vector& u, double dt, int substeps = 1) {
    const double h = dt / substeps;
    for (int i = 0; i < substeps; ++i) {
      const Vector k1 = a * x + b * u;
      const Vector k2 = a * (x + 0.5 * h * k1) + b * u;
      const Vector k3 = a * (x + 0.5 * h * k2) + b * u;
      const Vector k4 = a * (x + h * k3) + b * u;
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    const Matrix f = Matrix::Identity(a.rows(), a.cols()) + dt * a;
    p = f * p * f.transpose() + dt * dt * q;
  }

  void update(const Vector& y) {
    const Matrix s = c * p * c.transpose() + r;
    const Matrix gain = p * c.transpose() * dense_inverse(s);
    x += gain * (y - c * x);
    p = (Matrix::Identity(a.rows(), a.cols()) - gain * c) * p;
  }
};

}  // namespace oracles

#endif  // NISME_TESTS_ORACLES_HPP
