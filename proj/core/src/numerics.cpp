#include "nisme/numerics.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace nisme {

namespace {

int rank_from_singular_values(const Vector& s, double rank_tol) {
  if (s.size() == 0) return 0;
  const double cutoff = rank_tol * s(0);
  if (s(0) <= 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) ++rank;
  }
  return rank;
}

// Regularized lower incomplete gamma P(a, x), series for x < a + 1 and
// Lentz continued fraction otherwise.
double regularized_lower_gamma(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double log_gamma_a = std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - log_gamma_a);
  }
  // Upper-tail continued fraction, Q(a, x); P = 1 - Q.
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - log_gamma_a) * h;
  return 1.0 - q;
}

}  // namespace

SvdResult svd(const Matrix& m, double rank_tol) {
  require(all_finite(m), "svd: input has non-finite entries");
  SvdResult out;
  if (m.rows() == 0 || m.cols() == 0) {
    out.u = Matrix::Identity(m.rows(), m.rows());
    out.v = Matrix::Identity(m.cols(), m.cols());
    out.singular_values = Vector::Zero(0);
    out.numerical_rank = 0;
    return out;
  }
  Eigen::JacobiSVD<Matrix> solver(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("svd: decomposition did not converge");
  }
  out.u = solver.matrixU();
  out.v = solver.matrixV();
  out.singular_values = solver.singularValues();
  out.numerical_rank = rank_from_singular_values(out.singular_values, rank_tol);
  return out;
}

double chi_square_quantile(int df, double significance) {
  require(df >= 1, "chi_square_quantile: df must be >= 1");
  require(significance > 0.0 && significance < 1.0,
          "chi_square_quantile: significance must lie in (0, 1)");
  const double a = 0.5 * static_cast<double>(df);
  const auto cdf = [a](double x) { return regularized_lower_gamma(a, 0.5 * x); };
  double lo = 0.0;
  double hi = std::max(1.0, static_cast<double>(df));
  int guard = 0;
  while (cdf(hi) < significance && guard++ < 200) hi *= 2.0;
  while (hi - lo > 1e-8) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < significance) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double z_quantile(double significance) {
  require(significance > 0.0 && significance < 1.0,
          "z_quantile: significance must lie in (0, 1)");
  // P(|Z| <= z) = erf(z / sqrt(2))
  const auto coverage = [](double z) { return std::erf(z / std::sqrt(2.0)); };
  double lo = 0.0;
  double hi = 1.0;
  int guard = 0;
  while (coverage(hi) < significance && guard++ < 200) hi *= 2.0;
  while (hi - lo > 1e-8) {
    const double mid = 0.5 * (lo + hi);
    if (coverage(mid) < significance) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

PseudoInverse pinv_det_log(const Matrix& m, double rank_tol) {
  require(m.rows() == m.cols(), "pinv_det_log: matrix must be square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * scale,
          "pinv_det_log: matrix is not symmetric");
  const SvdResult dec = svd(symmetrized(m), rank_tol);
  PseudoInverse out;
  out.rank = dec.numerical_rank;
  Vector inv = Vector::Zero(dec.singular_values.size());
  out.log_pseudo_det = 0.0;
  for (int i = 0; i < out.rank; ++i) {
    inv(i) = 1.0 / dec.singular_values(i);
    out.log_pseudo_det += std::log(dec.singular_values(i));
  }
  out.pinv = dec.v * inv.asDiagonal() * dec.u.transpose();
  return out;
}

double gaussian_log_density(const Vector& x, const Matrix& cov, double rank_tol) {
  if (x.size() == 0) return 0.0;
  require(cov.rows() == x.size() && cov.cols() == x.size(),
          "gaussian_log_density: dimension mismatch");
  const PseudoInverse p = pinv_det_log(cov, rank_tol);
  const double quad = x.dot(p.pinv * x);
  constexpr double kLog2Pi = 1.8378770664093453;
  return -0.5 * (quad + static_cast<double>(p.rank) * kLog2Pi + p.log_pseudo_det);
}

}  // namespace nisme
