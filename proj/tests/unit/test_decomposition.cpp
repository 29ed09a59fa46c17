#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "nisme/decomposition.hpp"
#include "nisme/rng.hpp"
#include "support/oracles.hpp"

using namespace nisme;

namespace {

struct RandomProblem {
  Matrix h;
  Matrix r;
  Matrix c;
  Matrix g;
  int m, n, sd;
};

RandomProblem random_problem(Rng& rng, bool rank_deficient_h = false) {
  RandomProblem p;
  p.m = 3 + static_cast<int>(rng.uniform() * 4.999);   // 3..7 outputs
  p.n = 2 + static_cast<int>(rng.uniform() * 4.999);   // 2..6 states
  const int s = 1 + static_cast<int>(rng.uniform() * 2.999);
  p.sd = s + p.m;
  if (rank_deficient_h) {
    const int rank = static_cast<int>(rng.uniform() * std::min(p.m, 2));
    p.h = oracles::random_matrix(rng, p.m, rank) * oracles::random_matrix(rng, rank, p.sd);
  } else {
    p.h = oracles::random_matrix(rng, p.m, p.sd);
  }
  p.r = oracles::random_spd(rng, p.m);
  p.c = oracles::random_matrix(rng, p.m, p.n);
  p.g = oracles::random_matrix(rng, p.n, p.sd);
  return p;
}

}  // namespace

TEST_CASE("rank-zero feedthrough degenerates to a (z2, z3) split") {
  const int m = 4, n = 3, s = 2;
  const Matrix h = Matrix::Zero(m, s + m);
  Rng rng(3);
  const Matrix r = oracles::random_spd(rng, m);
  const Matrix c = oracles::random_matrix(rng, m, n);
  const Matrix g = oracles::random_matrix(rng, n, s + m);
  const DecompositionTransforms t = build_transforms(h, r, c, g);
  CHECK(t.p1() == 0);
  CHECK(t.t1.rows() == 0);
  CHECK((t.t2 - Matrix::Identity(m, m)).norm() == 0.0);
  CHECK(t.p1() + t.p2() + t.p3() == m);
}

TEST_CASE("selection feedthrough: both sensors attacked") {
  // h = [0 | I2] with m=2, s=1: direct feedthrough on every output
  const int m = 2, s = 1;
  Matrix h = Matrix::Zero(m, s + m);
  h(0, 1) = 1.0;
  h(1, 2) = 1.0;
  const Matrix r = Matrix::Identity(m, m);
  const Matrix c = Matrix::Identity(m, 2);
  const Matrix g = Matrix::Zero(2, s + m);
  const DecompositionTransforms t = build_transforms(h, r, c, g);
  CHECK(t.p1() == 2);
  CHECK(t.p3() == 0);
  CHECK(t.sigma(0) == doctest::Approx(1.0));
  CHECK(t.sigma(1) == doctest::Approx(1.0));
  // t1 is the identity up to row permutation and sign
  CHECK((t.t1 * t.t1.transpose() - Matrix::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("case-study-sized selection: 3 of 9 sensors attacked") {
  const int m = 9, s = 3, n = 6;
  Matrix h = Matrix::Zero(m, s + m);
  for (int idx : {0, 4, 7}) h(idx, s + idx) = 1.0;
  Rng rng(17);
  const Matrix r = oracles::random_spd(rng, m);
  const Matrix c = oracles::random_matrix(rng, m, n);
  const Matrix g = oracles::random_matrix(rng, n, s + m);
  const DecompositionTransforms t = build_transforms(h, r, c, g);
  CHECK(t.p1() == 3);
  CHECK(t.p2() + t.p3() == 6);
  // v1 spans exactly the attacked sensor coordinates
  for (int col = 0; col < 3; ++col) {
    double off_support = 0.0;
    for (int row = 0; row < s + m; ++row) {
      const bool on = row == s + 0 || row == s + 4 || row == s + 7;
      if (!on) off_support += std::abs(t.v1(row, col));
    }
    CHECK(off_support < 1e-10);
  }
}

TEST_CASE("stacked transforms reproduce the output split") {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const RandomProblem p = random_problem(rng, trial % 2 == 0);
    const DecompositionTransforms t = build_transforms(p.h, p.r, p.c, p.g);
    CHECK(t.p1() + t.p2() + t.p3() == p.m);
    const Vector y = oracles::random_matrix(rng, p.m, 1).col(0);
    const DecomposedOutput z = decompose_output(y, t);
    Matrix stacked(p.m, p.m);
    int row = 0;
    if (t.p1() > 0) stacked.middleRows(row, t.p1()) = t.t1, row += t.p1();
    if (t.p2() > 0) stacked.middleRows(row, t.p2()) = t.tbar1 * t.t2, row += t.p2();
    if (t.p3() > 0) stacked.middleRows(row, t.p3()) = t.tbar2 * t.t2, row += t.p3();
    Vector z_stacked(p.m);
    row = 0;
    if (t.p1() > 0) z_stacked.segment(row, t.p1()) = z.z1, row += t.p1();
    if (t.p2() > 0) z_stacked.segment(row, t.p2()) = z.z2, row += t.p2();
    if (t.p3() > 0) z_stacked.segment(row, t.p3()) = z.z3, row += t.p3();
    CHECK((z_stacked - stacked * y).norm() < 1e-12 * std::max(1.0, y.norm()));
  }
  CHECK_THROWS_AS(
      decompose_output(Vector::Zero(2),
                       build_transforms(Matrix::Zero(3, 4), Matrix::Identity(3, 3),
                                        Matrix::Zero(3, 2), Matrix::Zero(2, 4))),
      DomainError);
}

TEST_CASE("whitened cross-covariances vanish and blocks stay SPD") {
  Rng rng(29);
  for (int trial = 0; trial < 40; ++trial) {
    const RandomProblem p = random_problem(rng, trial % 3 == 0);
    const DecompositionTransforms t = build_transforms(p.h, p.r, p.c, p.g);
    const double scale = p.r.norm();
    const Matrix r12 = t.t1 * p.r * t.t2.transpose() * t.tbar1.transpose();
    const Matrix r13 = t.t1 * p.r * t.t2.transpose() * t.tbar2.transpose();
    const Matrix r23 = t.tbar1 * t.t2 * p.r * t.t2.transpose() * t.tbar2.transpose();
    if (r12.size() > 0) CHECK(r12.norm() <= 1e-10 * scale);
    if (r13.size() > 0) CHECK(r13.norm() <= 1e-10 * scale);
    if (r23.size() > 0) CHECK(r23.norm() <= 1e-10 * scale);

    const DecomposedNoise noise = decompose_noise(p.r, t);
    for (const Matrix* block : {&noise.r1, &noise.r2, &noise.r3}) {
      if (block->rows() == 0) continue;
      Eigen::SelfAdjointEigenSolver<Matrix> eig(*block, Eigen::EigenvaluesOnly);
      CHECK(eig.eigenvalues().minCoeff() > 0.0);
    }
  }
}

TEST_CASE("singular values match the stage inputs") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const RandomProblem p = random_problem(rng, true);
    const DecompositionTransforms t = build_transforms(p.h, p.r, p.c, p.g);
    // sigma equals the nonzero singular values of H
    const SvdResult h_svd = svd(p.h);
    for (int i = 0; i < t.p1(); ++i) {
      CHECK(t.sigma(i) == doctest::Approx(h_svd.singular_values(i)).epsilon(1e-10));
    }
    CHECK(t.p1() == h_svd.numerical_rank);
    // [v1 v2] columns are orthonormal
    Matrix v(p.sd, t.p1() + t.p2());
    if (t.p1() > 0) v.leftCols(t.p1()) = t.v1;
    if (t.p2() > 0) v.rightCols(t.p2()) = t.v2;
    if (v.cols() > 0) {
      CHECK((v.transpose() * v - Matrix::Identity(v.cols(), v.cols())).norm() < 1e-10);
    }
  }
}

TEST_CASE("second-stage singular values match the dynamic coupling") {
  // with no feedthrough the coupling is C*G itself, so sigma_bar must equal
  // its nonzero singular values
  Rng rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 4, n = 3, s = 2;
    const Matrix h = Matrix::Zero(m, s + m);
    const Matrix r = oracles::random_spd(rng, m);
    const Matrix c = oracles::random_matrix(rng, m, n);
    const Matrix g = oracles::random_matrix(rng, n, 2) * oracles::random_matrix(rng, 2, s + m);
    const DecompositionTransforms t = build_transforms(h, r, c, g);
    const SvdResult oracle = svd(Matrix(c * g));
    REQUIRE(t.p2() == oracle.numerical_rank);
    for (int i = 0; i < t.p2(); ++i) {
      CHECK(t.sigma_bar(i) == doctest::Approx(oracle.singular_values(i)).epsilon(1e-10));
    }
  }
}

TEST_CASE("identity noise with orthonormal blocks decomposes to identity blocks") {
  const int m = 3, s = 1;
  Matrix h = Matrix::Zero(m, s + m);
  h(0, s + 0) = 1.0;  // one attacked sensor
  const Matrix r = Matrix::Identity(m, m);
  const Matrix c = Matrix::Identity(m, m);
  Matrix g = Matrix::Zero(m, s + m);
  g(1, 0) = 1.0;  // the actuator reaches state 1
  const DecompositionTransforms t = build_transforms(h, r, c, g);
  const DecomposedNoise noise = decompose_noise(r, t);
  CHECK((noise.r1 - Matrix::Identity(t.p1(), t.p1())).norm() < 1e-12);
  CHECK((noise.r2 - Matrix::Identity(t.p2(), t.p2())).norm() < 1e-12);
  CHECK((noise.r3 - Matrix::Identity(t.p3(), t.p3())).norm() < 1e-12);
}
