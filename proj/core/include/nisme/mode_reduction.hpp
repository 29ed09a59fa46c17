#ifndef NISME_MODE_REDUCTION_HPP
#define NISME_MODE_REDUCTION_HPP

#include <string>
#include <vector>

#include "nisme/types.hpp"

namespace nisme {

// A hypothesis on which signal locations are attacked, in stacked
// actuator-then-sensor coordinates (0-based indices in [0, s+m)).
struct AttackLocationSet {
  std::vector<int> indices;  // sorted ascending, unique

  AttackLocationSet() = default;
  explicit AttackLocationSet(std::vector<int> idx);

  int cardinality() const { return static_cast<int>(indices.size()); }
  bool contains(int location) const;
  bool strict_subset_of(const AttackLocationSet& other) const;
  bool operator==(const AttackLocationSet& other) const {
    return indices == other.indices;
  }
  Matrix mask(int signal_dim) const;  // diagonal 0/1 K matrix
  std::string to_string() const;

  // All subsets of the given locations (including the empty set).
  static std::vector<AttackLocationSet> power_set(const std::vector<int>& locations);
};

// Linearized plant data for one structural hypothesis; reduction is defined
// for linear modes only.
struct LinearPlantData {
  Matrix a;                 // continuous-time state Jacobian, n x n
  Matrix c;                 // output Jacobian, m x n
  Matrix attack_input_map;  // df/dd before masking, n x (s+m)
  Matrix process_cov;       // per-step Q
  Matrix measurement_cov;   // R, PD
  double dt = 0.0;
  int input_dim = 0;  // s
};

// Windowed observability Gramian: sum over the provided window of
// Phi_i^T C_i^T C_i Phi_i with Phi the ordered product of the step
// transitions (Phi_0 = I). abar_seq[i] advances step i -> i+1.
Matrix observability_gramian(const std::vector<Matrix>& abar_seq,
                             const std::vector<Matrix>& c_seq);

struct ObservabilityReport {
  int window_start = 0;
  int window_end = 0;
  int horizon = 0;
  double min_gramian_eig = 0.0;
  double max_gramian_eig = 0.0;
  bool observable = false;
};

// Uniform observability of the filter pair (C3, Abar) induced by an attack
// hypothesis on a linear plant, over [c1, c2] with the given horizon.
// a_tol is the lower Gramian bound tested; the upper eigenvalue is recorded
// but not tested.
ObservabilityReport check_uniform_observability(const LinearPlantData& plant,
                                                const AttackLocationSet& attacks,
                                                int c1, int c2, int horizon,
                                                double a_tol,
                                                double rank_tol = 1e-10);

struct ReductionAudit {
  enum class Outcome { kept, unobservable, dominated };
  struct Entry {
    AttackLocationSet set;
    Outcome outcome = Outcome::kept;
    double min_gramian_eig = 0.0;
    std::string dominating_set;  // when dominated
  };
  std::vector<Entry> entries;
};

// Keep the observable hypotheses whose attack sets are not strictly
// contained in an already kept set, scanning cardinalities from largest to
// smallest. The empty set is never a candidate. The result is a
// subset-incomparable family of observable hypotheses.
std::vector<AttackLocationSet> reduce_modes(
    const std::vector<AttackLocationSet>& candidates, const LinearPlantData& plant,
    int c1, int c2, int horizon, double a_tol, double rank_tol = 1e-10,
    ReductionAudit* audit = nullptr);

struct TrueModeDecision {
  AttackLocationSet significant_locations;  // K of the recovered true mode
  Vector attack_estimate;  // (s+m) in signal coordinates, suppressed entries 0
};

// Element-wise two-tailed z-tests on the hypothesised attack locations.
// Estimates and variances are given in signal (location) coordinates;
// actuator locations (index < input_dim) are tested against the dynamics
// attack estimate and sensor locations against the feedthrough estimate.
// A zero variance with a nonzero estimate counts as significant.
TrueModeDecision true_mode_estimation(const AttackLocationSet& hypothesis,
                                      int input_dim, const Vector& d1_loc,
                                      const Vector& d1_var_loc,
                                      const Vector& d2_loc,
                                      const Vector& d2_var_loc, double z1_critical,
                                      double z2_critical);

}  // namespace nisme

#endif  // NISME_MODE_REDUCTION_HPP
