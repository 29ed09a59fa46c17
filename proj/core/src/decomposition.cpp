#include "nisme/decomposition.hpp"

#include <Eigen/Cholesky>

namespace nisme {

namespace {

// [I  -U1^T R U2 (U2^T R U2)^{-1}] [U1^T; U2^T] given the split (U1, U2).
// The correction block decorrelates the retained rows from the discarded ones.
Matrix whitened_projector(const Matrix& u1, const Matrix& u2, const Matrix& r) {
  if (u1.cols() == 0) return u1.transpose();
  if (u2.cols() == 0) return u1.transpose();
  const Matrix u2ru2 = symmetrized(u2.transpose() * r * u2);
  Eigen::LLT<Matrix> llt(u2ru2);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(
        "build_transforms: discarded-block covariance is numerically singular");
  }
  const Matrix correction = llt.solve(u2.transpose() * r * u1).transpose();
  return u1.transpose() - correction * u2.transpose();
}

}  // namespace

DecompositionTransforms build_transforms(const Matrix& h_feed, const Matrix& r,
                                         const Matrix& c, const Matrix& g_prev,
                                         double rank_tol) {
  const int m = static_cast<int>(h_feed.rows());
  const int sd = static_cast<int>(h_feed.cols());
  const int n = static_cast<int>(c.cols());
  require(r.rows() == m && r.cols() == m, "build_transforms: R must be m x m");
  require(c.rows() == m, "build_transforms: C must have m rows");
  require(g_prev.rows() == n && g_prev.cols() == sd,
          "build_transforms: G must be n x (s+m)");
  {
    Eigen::LLT<Matrix> llt(symmetrized(r));
    require(llt.info() == Eigen::Success, "build_transforms: R must be positive definite");
  }

  DecompositionTransforms out;
  out.output_dim = m;
  out.signal_dim = sd;

  Matrix v2_raw;  // (s+m) x (s+m - p1)
  const SvdResult h_svd = svd(h_feed, rank_tol);
  const int p1 = h_svd.numerical_rank;
  if (p1 == 0) {
    out.t1 = Matrix::Zero(0, m);
    out.t2 = Matrix::Identity(m, m);
    out.sigma = Vector::Zero(0);
    out.v1 = Matrix::Zero(sd, 0);
    v2_raw = Matrix::Identity(sd, sd);
  } else {
    const Matrix u1 = h_svd.u.leftCols(p1);
    const Matrix u2 = h_svd.u.rightCols(m - p1);
    out.t1 = whitened_projector(u1, u2, r);
    out.t2 = u2.transpose();
    out.sigma = h_svd.singular_values.head(p1);
    out.v1 = h_svd.v.leftCols(p1);
    v2_raw = h_svd.v.rightCols(sd - p1);
  }

  const int p23 = m - p1;
  if (p23 == 0) {
    out.tbar1 = Matrix::Zero(0, 0);
    out.tbar2 = Matrix::Zero(0, 0);
    out.sigma_bar = Vector::Zero(0);
    out.v2 = Matrix::Zero(sd, 0);
    return out;
  }

  const Matrix coupling = out.t2 * c * g_prev * v2_raw;
  const SvdResult bar_svd = svd(coupling, rank_tol);
  const int p2 = bar_svd.numerical_rank;
  if (p2 == 0) {
    out.tbar1 = Matrix::Zero(0, p23);
    out.tbar2 = Matrix::Identity(p23, p23);
    out.sigma_bar = Vector::Zero(0);
    out.v2 = Matrix::Zero(sd, 0);
    return out;
  }

  const Matrix ubar1 = bar_svd.u.leftCols(p2);
  const Matrix ubar2 = bar_svd.u.rightCols(p23 - p2);
  const Matrix r_bar = symmetrized(out.t2 * r * out.t2.transpose());
  out.tbar1 = whitened_projector(ubar1, ubar2, r_bar);
  out.tbar2 = ubar2.transpose();
  out.sigma_bar = bar_svd.singular_values.head(p2);
  out.v2 = v2_raw * bar_svd.v.leftCols(p2);
  return out;
}

DecomposedOutput decompose_output(const Vector& y, const DecompositionTransforms& t) {
  require(static_cast<int>(y.size()) == t.output_dim,
          "decompose_output: y has the wrong dimension");
  DecomposedOutput out;
  out.z1 = t.t1 * y;
  const Vector t2y = t.t2 * y;
  out.z2 = t.tbar1 * t2y;
  out.z3 = t.tbar2 * t2y;
  return out;
}

DecomposedNoise decompose_noise(const Matrix& r, const DecompositionTransforms& t) {
  require(r.rows() == t.output_dim && r.cols() == t.output_dim,
          "decompose_noise: R has the wrong dimension");
  DecomposedNoise out;
  out.r1 = symmetrized(t.t1 * r * t.t1.transpose());
  const Matrix t2r = t.t2 * r * t.t2.transpose();
  out.r2 = symmetrized(t.tbar1 * t2r * t.tbar1.transpose());
  out.r3 = symmetrized(t.tbar2 * t2r * t.tbar2.transpose());
  return out;
}

}  // namespace nisme
