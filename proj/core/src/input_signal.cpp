#include "nisme/input_signal.hpp"

#include <algorithm>

namespace nisme {

InputSignal InputSignal::constant(Vector value) {
  InputSignal s;
  s.constant_ = std::move(value);
  s.is_constant_ = true;
  return s;
}

InputSignal::InputSignal(std::vector<double> times, std::vector<Vector> values)
    : times_(std::move(times)), values_(std::move(values)), is_constant_(false) {
  require(times_.size() == values_.size(), "InputSignal: times/values size mismatch");
  require(!times_.empty(), "InputSignal: empty sample record");
  for (std::size_t i = 1; i < times_.size(); ++i) {
    require(times_[i] > times_[i - 1], "InputSignal: times must be strictly increasing");
    require(values_[i].size() == values_[0].size(), "InputSignal: inconsistent value dims");
  }
}

Vector InputSignal::at(double t) const {
  if (is_constant_) return constant_;
  if (t <= times_.front()) return values_.front();
  if (t >= times_.back()) return values_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
  return (1.0 - w) * values_[lo] + w * values_[hi];
}

int InputSignal::dim() const {
  if (is_constant_) return static_cast<int>(constant_.size());
  return static_cast<int>(values_.front().size());
}

}  // namespace nisme
