#ifndef NISME_NUMERICS_HPP
#define NISME_NUMERICS_HPP

#include "nisme/types.hpp"

namespace nisme {

// Relative rank cutoff: singular values above rank_tol * sigma_max count.
inline constexpr double kRankTol = 1e-10;

struct SvdResult {
  Matrix u;                // full left singular vectors
  Vector singular_values;  // descending, non-negative
  Matrix v;                // full right singular vectors
  int numerical_rank = 0;
};

// Full SVD with a numerical rank decision. Throws DomainError on non-finite
// input and NumericalError if the decomposition does not converge.
SvdResult svd(const Matrix& m, double rank_tol = kRankTol);

// Quantile of the chi-square distribution with df degrees of freedom:
// returns q with P(X <= q) = significance. Bisection on the regularized
// lower incomplete gamma function, absolute tolerance 1e-8.
double chi_square_quantile(int df, double significance);

// Two-tailed standard-normal critical value: z with P(|Z| <= z) = significance.
double z_quantile(double significance);

struct PseudoInverse {
  Matrix pinv;
  double log_pseudo_det = 0.0;  // sum of log sigma_i over the retained spectrum
  int rank = 0;
};

// Moore-Penrose pseudoinverse of a square symmetric matrix via SVD.
// Throws DomainError when the input is asymmetric beyond tolerance.
PseudoInverse pinv_det_log(const Matrix& m, double rank_tol = kRankTol);

// log N(x; 0, cov) evaluated with the pseudo-inverse and pseudo-determinant
// on the numerical rank of cov. A zero-dimensional x yields 0.
double gaussian_log_density(const Vector& x, const Matrix& cov,
                            double rank_tol = kRankTol);

}  // namespace nisme

#endif  // NISME_NUMERICS_HPP
