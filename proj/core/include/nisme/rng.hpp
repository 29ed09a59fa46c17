#ifndef NISME_RNG_HPP
#define NISME_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include "nisme/types.hpp"

namespace nisme {

// Seeded generator for reproducible simulation. The uniform mapping and the
// Box-Muller transform are spelled out here instead of going through
// std::*_distribution so that a given seed produces the same stream on every
// standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  Vector gaussian_vector(int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = gaussian();
    return v;
  }

  // Sample N(0, cov) through the Cholesky factor of cov (PSD; a zero matrix
  // yields the zero vector).
  Vector gaussian_vector_cov(const Matrix& cov) {
    Eigen::LLT<Matrix> llt(symmetrized(cov) +
                           1e-300 * Matrix::Identity(cov.rows(), cov.cols()));
    if (llt.info() != Eigen::Success) {
      throw NumericalError("rng: covariance is not positive semidefinite");
    }
    return llt.matrixL() * gaussian_vector(static_cast<int>(cov.rows()));
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace nisme

#endif  // NISME_RNG_HPP
