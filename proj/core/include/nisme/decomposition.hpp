#ifndef NISME_DECOMPOSITION_HPP
#define NISME_DECOMPOSITION_HPP

#include "nisme/numerics.hpp"
#include "nisme/types.hpp"

namespace nisme {

// Per-step output splitting for one mode hypothesis. An output sample y is
// separated into
//   z1 = T1 y          the directly attacked part (feedthrough present),
//   z2 = Tbar1 T2 y    the part that reflects last step's unmeasured attack
//                      through the dynamics,
//   z3 = Tbar2 T2 y    the attack-free part used for the state update.
// The attack vector splits accordingly: d1 = V1^T d is visible in z1, and the
// component estimable from z2 lives on the columns of V2. Rank-0 stages
// collapse to empty blocks (zero-row matrices), so p1 + p2 + p3 == m always.
struct DecompositionTransforms {
  Matrix t1;         // p1 x m
  Matrix t2;         // (m - p1) x m
  Matrix tbar1;      // p2 x (m - p1)
  Matrix tbar2;      // p3 x (m - p1)
  Vector sigma;      // p1 positive singular values of the feedthrough
  Vector sigma_bar;  // p2 positive singular values of the dynamic coupling
  Matrix v1;         // (s+m) x p1, orthonormal columns
  Matrix v2;         // (s+m) x p2, orthonormal columns, orthogonal to v1
  int output_dim = 0;  // m
  int signal_dim = 0;  // s + m

  int p1() const { return static_cast<int>(sigma.size()); }
  int p2() const { return static_cast<int>(sigma_bar.size()); }
  int p3() const { return output_dim - p1() - p2(); }
};

struct DecomposedOutput {
  Vector z1;
  Vector z2;
  Vector z3;
};

struct DecomposedNoise {
  Matrix r1;
  Matrix r2;
  Matrix r3;
};

// Build both transformations from the feedthrough map h_feed (m x (s+m)),
// the measurement covariance r (PD, m x m), the output Jacobian c (m x n)
// and the previous-step attack input map g_prev (n x (s+m)).
DecompositionTransforms build_transforms(const Matrix& h_feed, const Matrix& r,
                                         const Matrix& c, const Matrix& g_prev,
                                         double rank_tol = kRankTol);

DecomposedOutput decompose_output(const Vector& y, const DecompositionTransforms& t);

DecomposedNoise decompose_noise(const Matrix& r, const DecompositionTransforms& t);

}  // namespace nisme

#endif  // NISME_DECOMPOSITION_HPP
