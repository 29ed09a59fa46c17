#ifndef NISME_TYPES_HPP
#define NISME_TYPES_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace nisme {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Malformed inputs: dimension mismatches, out-of-range parameters.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation left the numerically valid regime: a matrix that should be
// definite is singular, an iteration failed to converge, and so on.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Integration or filtering produced a non-finite state.
class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline void require(bool condition, const std::string& message) {
  if (!condition) throw DomainError(message);
}

}  // namespace nisme

#endif  // NISME_TYPES_HPP
