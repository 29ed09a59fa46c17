#ifndef NISME_INPUT_SIGNAL_HPP
#define NISME_INPUT_SIGNAL_HPP

#include <vector>

#include "nisme/types.hpp"

namespace nisme {

// Sampled control trajectory u(t). Piecewise-linear between samples, clamped
// to the end samples outside the recorded span.
class InputSignal {
 public:
  InputSignal() : constant_(Vector::Zero(0)) {}

  static InputSignal constant(Vector value);
  InputSignal(std::vector<double> times, std::vector<Vector> values);

  Vector at(double t) const;
  int dim() const;
  bool empty() const { return !is_constant_ && times_.empty(); }

 private:
  std::vector<double> times_;
  std::vector<Vector> values_;
  Vector constant_;
  bool is_constant_ = true;
};

}  // namespace nisme

#endif  // NISME_INPUT_SIGNAL_HPP
