#include "nisme/mode_reduction.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "nisme/decomposition.hpp"
#include "nisme/numerics.hpp"

namespace nisme {

AttackLocationSet::AttackLocationSet(std::vector<int> idx) : indices(std::move(idx)) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  for (int i : indices) require(i >= 0, "AttackLocationSet: negative location");
}

bool AttackLocationSet::contains(int location) const {
  return std::binary_search(indices.begin(), indices.end(), location);
}

bool AttackLocationSet::strict_subset_of(const AttackLocationSet& other) const {
  if (cardinality() >= other.cardinality()) return false;
  return std::includes(other.indices.begin(), other.indices.end(), indices.begin(),
                       indices.end());
}

Matrix AttackLocationSet::mask(int signal_dim) const {
  Matrix k = Matrix::Zero(signal_dim, signal_dim);
  for (int i : indices) {
    require(i < signal_dim, "AttackLocationSet: location outside signal range");
    k(i, i) = 1.0;
  }
  return k;
}

std::string AttackLocationSet::to_string() const {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i) os << ",";
    os << indices[i];
  }
  os << "}";
  return os.str();
}

std::vector<AttackLocationSet> AttackLocationSet::power_set(
    const std::vector<int>& locations) {
  require(locations.size() <= 20, "power_set: too many locations");
  const std::size_t total = std::size_t(1) << locations.size();
  std::vector<AttackLocationSet> out;
  out.reserve(total);
  for (std::size_t bits = 0; bits < total; ++bits) {
    std::vector<int> subset;
    for (std::size_t j = 0; j < locations.size(); ++j) {
      if (bits & (std::size_t(1) << j)) subset.push_back(locations[j]);
    }
    out.emplace_back(std::move(subset));
  }
  return out;
}

Matrix observability_gramian(const std::vector<Matrix>& abar_seq,
                             const std::vector<Matrix>& c_seq) {
  require(!c_seq.empty(), "observability_gramian: empty output sequence");
  require(abar_seq.size() + 1 >= c_seq.size(),
          "observability_gramian: transition sequence too short");
  const int n = static_cast<int>(c_seq.front().cols());
  Matrix gramian = Matrix::Zero(n, n);
  Matrix phi = Matrix::Identity(n, n);
  for (std::size_t i = 0; i < c_seq.size(); ++i) {
    require(c_seq[i].cols() == n, "observability_gramian: inconsistent dims");
    gramian += phi.transpose() * c_seq[i].transpose() * c_seq[i] * phi;
    if (i + 1 < c_seq.size()) {
      phi = abar_seq[i] * phi;
    }
  }
  return symmetrized(gramian);
}

namespace {

// Discretized filter pair (C3, Abar) induced by the hypothesis on the linear
// plant; constant in time, so one Gramian covers the whole window.
struct FilterPair {
  Matrix abar;
  Matrix c3;
  bool degenerate = false;  // no attack-free output part
};

FilterPair filter_pair_for(const LinearPlantData& plant,
                           const AttackLocationSet& attacks, double rank_tol) {
  const int n = static_cast<int>(plant.a.rows());
  const int m = static_cast<int>(plant.c.rows());
  const int sd = static_cast<int>(plant.attack_input_map.cols());
  const Matrix k = attacks.mask(sd);
  const Matrix h_loc = [&] {
    Matrix h = Matrix::Zero(m, sd);
    h.rightCols(m) = Matrix::Identity(m, m);
    return Matrix(h * k);
  }();
  const Matrix g = plant.attack_input_map * k;
  const DecompositionTransforms tr =
      build_transforms(h_loc, plant.measurement_cov, plant.c, g, rank_tol);

  FilterPair out;
  if (tr.p3() == 0) {
    out.degenerate = true;
    out.abar = Matrix::Identity(n, n);
    out.c3 = Matrix::Zero(0, n);
    return out;
  }
  const double dt = plant.dt;
  const Matrix identity = Matrix::Identity(n, n);
  Matrix w_factor = identity;
  if (tr.p2() > 0) {
    const Matrix g2 = g * tr.v2;
    const Vector m2_diag = (dt * tr.sigma_bar).cwiseInverse();
    const Matrix c2 = tr.tbar1 * tr.t2 * plant.c;
    w_factor -= dt * g2 * m2_diag.asDiagonal() * c2;
  }
  Matrix d1_feedback = Matrix::Zero(n, n);
  if (tr.p1() > 0) {
    const Matrix g1 = g * tr.v1;
    const Vector m1_diag = tr.sigma.cwiseInverse();
    const Matrix c1 = tr.t1 * plant.c;
    d1_feedback = g1 * m1_diag.asDiagonal() * c1;
  }
  out.abar = w_factor * (identity + dt * plant.a - dt * d1_feedback);
  out.c3 = tr.tbar2 * tr.t2 * plant.c;
  return out;
}

}  // namespace

ObservabilityReport check_uniform_observability(const LinearPlantData& plant,
                                                const AttackLocationSet& attacks,
                                                int c1, int c2, int horizon,
                                                double a_tol, double rank_tol) {
  require(horizon >= 0, "check_uniform_observability: horizon must be >= 0");
  require(c2 > c1, "check_uniform_observability: empty window");
  require(horizon < c2 - c1,
          "check_uniform_observability: horizon must be shorter than the window");

  ObservabilityReport report;
  report.window_start = c1;
  report.window_end = c2;
  report.horizon = horizon;

  const FilterPair pair = filter_pair_for(plant, attacks, rank_tol);
  if (pair.degenerate) {
    report.observable = false;
    return report;
  }
  const std::vector<Matrix> abar_seq(static_cast<std::size_t>(horizon), pair.abar);
  const std::vector<Matrix> c_seq(static_cast<std::size_t>(horizon) + 1, pair.c3);
  const Matrix gramian = observability_gramian(abar_seq, c_seq);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gramian, Eigen::EigenvaluesOnly);
  report.min_gramian_eig = eig.eigenvalues().minCoeff();
  report.max_gramian_eig = eig.eigenvalues().maxCoeff();
  // The plant matrices are constant, so the Gramian is the same at every k in
  // the window; one evaluation certifies all of them.
  report.observable = report.min_gramian_eig >= a_tol;
  return report;
}

std::vector<AttackLocationSet> reduce_modes(
    const std::vector<AttackLocationSet>& candidates, const LinearPlantData& plant,
    int c1, int c2, int horizon, double a_tol, double rank_tol,
    ReductionAudit* audit) {
  std::vector<AttackLocationSet> ordered = candidates;
  std::sort(ordered.begin(), ordered.end(),
            [](const AttackLocationSet& lhs, const AttackLocationSet& rhs) {
              if (lhs.cardinality() != rhs.cardinality()) {
                return lhs.cardinality() > rhs.cardinality();
              }
              return lhs.indices < rhs.indices;
            });

  std::vector<AttackLocationSet> kept;
  for (const AttackLocationSet& candidate : ordered) {
    if (candidate.cardinality() == 0) continue;  // the empty set is never scanned
    const AttackLocationSet* dominator = nullptr;
    for (const AttackLocationSet& k : kept) {
      if (candidate.strict_subset_of(k)) {
        dominator = &k;
        break;
      }
    }
    if (dominator != nullptr) {
      if (audit) {
        audit->entries.push_back({candidate, ReductionAudit::Outcome::dominated, 0.0,
                                  dominator->to_string()});
      }
      continue;
    }
    const ObservabilityReport report =
        check_uniform_observability(plant, candidate, c1, c2, horizon, a_tol, rank_tol);
    if (!report.observable) {
      if (audit) {
        audit->entries.push_back({candidate, ReductionAudit::Outcome::unobservable,
                                  report.min_gramian_eig, ""});
      }
      continue;
    }
    if (audit) {
      audit->entries.push_back(
          {candidate, ReductionAudit::Outcome::kept, report.min_gramian_eig, ""});
    }
    kept.push_back(candidate);
  }
  return kept;
}

TrueModeDecision true_mode_estimation(const AttackLocationSet& hypothesis,
                                      int input_dim, const Vector& d1_loc,
                                      const Vector& d1_var_loc, const Vector& d2_loc,
                                      const Vector& d2_var_loc, double z1_critical,
                                      double z2_critical) {
  const int sd = static_cast<int>(d1_loc.size());
  require(d1_var_loc.size() == sd && d2_loc.size() == sd && d2_var_loc.size() == sd,
          "true_mode_estimation: location vectors must share the signal dimension");

  const auto rejected = [](double value, double variance, double critical) {
    if (variance <= 0.0 || !std::isfinite(variance)) {
      // no reported uncertainty: a nonzero estimate must not be suppressed
      return value != 0.0;
    }
    return std::abs(value) / std::sqrt(variance) > critical;
  };

  TrueModeDecision out;
  out.attack_estimate = Vector::Zero(sd);
  std::vector<int> significant;
  for (int location : hypothesis.indices) {
    require(location < sd, "true_mode_estimation: location outside signal range");
    if (location < input_dim) {
      if (rejected(d2_loc(location), d2_var_loc(location), z2_critical)) {
        significant.push_back(location);
        out.attack_estimate(location) = d2_loc(location);
      }
    } else {
      if (rejected(d1_loc(location), d1_var_loc(location), z1_critical)) {
        significant.push_back(location);
        out.attack_estimate(location) = d1_loc(location);
      }
    }
  }
  out.significant_locations = AttackLocationSet(std::move(significant));
  return out;
}

}  // namespace nisme
