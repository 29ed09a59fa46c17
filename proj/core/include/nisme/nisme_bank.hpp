#ifndef NISME_NISME_BANK_HPP
#define NISME_NISME_BANK_HPP

#include <vector>

#include "nisme/nise.hpp"

namespace nisme {

struct BankConfig {
  double probability_floor = 0.033;  // delta: keeps every mode revivable
  double alpha1 = 0.75;              // significance of the d1 chi-square test
  double alpha2 = 0.75;              // significance of the d2 chi-square test
  NiseConfig nise;
  int threads = 1;
};

struct BankState {
  std::vector<FilterState> filters;
  Vector posteriors;        // mu, sums to 1, every entry > 0
  int map_mode = 0;         // argmax posterior (index into the mode vector)
  int reported_mode = 0;    // after the attack-significance decision
  int step = 0;
  bool underflow_flagged = false;       // all likelihoods vanished this step
  std::vector<char> quarantined;        // modes that failed numerically this step
};

struct JointEstimate {
  int reported_mode_id = 0;  // mode_id of the reported mode
  int map_mode_id = 0;
  Vector x_hat;
  Vector d1_hat;  // zeroed when the attack is not significant
  Vector d2_hat;
  Vector attack_location_estimate;  // (s+m), zeroed likewise
  bool attack_significant = false;
  bool attack_free_mode_missing = false;  // no K == 0 sibling in the mode set
  Vector posteriors;
  double map_log_likelihood = 0.0;
};

struct PosteriorUpdate {
  Vector posteriors;
  bool underflow = false;
};

// Bayes update in log space with max-shift, elementwise floor at
// probability_floor, renormalization. Quarantined (invalid) modes are
// excluded from the Bayes pool and frozen at the floor. If every valid
// likelihood underflows the priors are kept and the step is flagged.
PosteriorUpdate update_posteriors(const Vector& priors, const Vector& log_likelihoods,
                                  const std::vector<char>& valid, double floor);

// Argmax with ties broken toward the smallest index.
int select_mode(const Vector& posteriors);

// Chi-square attack-significance test on the MAP mode's attack estimates.
// Returns true when either quadratic form reaches its critical value; empty
// estimates count as below threshold.
bool significance_test(const Vector& d1_hat, const Matrix& p_d1,
                       const Vector& d2_hat, const Matrix& p_d2, double alpha1,
                       double alpha2);

// Bank of per-mode estimators plus the Bayesian mode selector.
class NismeBank {
 public:
  NismeBank(std::vector<ModeModel> models, BankConfig config);

  void init(const Vector& x0, const Matrix& p0, const Vector& y0, const Vector& u0);
  JointEstimate step(const Vector& y, const InputSignal& u, double t_prev, double dt);

  const BankState& state() const { return state_; }
  const std::vector<ModeModel>& models() const { return models_; }
  const std::vector<double>& last_log_likelihoods() const { return last_log_lik_; }

  // Index of the signal-attack-free mode sharing mode_index's structural_id,
  // or -1 when absent.
  int attack_free_counterpart(int mode_index) const;

 private:
  std::vector<ModeModel> models_;
  std::vector<NiseFilter> filters_;
  BankConfig config_;
  BankState state_;
  std::vector<double> last_log_lik_;
};

// Split a worklist across a bounded number of threads; fn(i) must be safe to
// run concurrently for distinct i. Runs inline when threads <= 1.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace nisme

#endif  // NISME_NISME_BANK_HPP
