#include "nisme/nisme_bank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "nisme/numerics.hpp"

namespace nisme {

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

PosteriorUpdate update_posteriors(const Vector& priors, const Vector& log_likelihoods,
                                  const std::vector<char>& valid, double floor) {
  const int count = static_cast<int>(priors.size());
  require(count > 0, "update_posteriors: empty mode set");
  require(log_likelihoods.size() == count, "update_posteriors: size mismatch");
  require(static_cast<int>(valid.size()) == count, "update_posteriors: mask mismatch");
  require(floor > 0.0 && floor < 1.0 / static_cast<double>(count),
          "update_posteriors: floor must satisfy 0 < delta < 1/|modes|");

  PosteriorUpdate out;
  Vector weights = Vector::Zero(count);
  double max_log = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) {
    if (!valid[i]) continue;
    const double w = log_likelihoods(i) + std::log(priors(i));
    max_log = std::max(max_log, w);
  }
  double total = 0.0;
  if (std::isfinite(max_log)) {
    for (int i = 0; i < count; ++i) {
      if (!valid[i]) continue;
      weights(i) = std::exp(log_likelihoods(i) + std::log(priors(i)) - max_log);
      total += weights(i);
    }
  }
  Vector bar(count);
  if (total <= 0.0 || !std::isfinite(total)) {
    // every surviving likelihood vanished: keep the previous posteriors
    out.underflow = true;
    bar = priors;
  } else {
    for (int i = 0; i < count; ++i) bar(i) = valid[i] ? weights(i) / total : 0.0;
  }
  for (int i = 0; i < count; ++i) bar(i) = std::max(bar(i), floor);
  out.posteriors = bar / bar.sum();
  return out;
}

int select_mode(const Vector& posteriors) {
  require(posteriors.size() > 0, "select_mode: empty distribution");
  int best = 0;
  for (int i = 1; i < posteriors.size(); ++i) {
    if (posteriors(i) > posteriors(best)) best = i;
  }
  return best;
}

namespace {

bool quad_form_below(const Vector& d, const Matrix& p, double alpha) {
  if (d.size() == 0) return true;  // vacuously below threshold
  const PseudoInverse pinv = pinv_det_log(p);
  const double form = d.dot(pinv.pinv * d);
  const double critical = chi_square_quantile(static_cast<int>(d.size()), alpha);
  return form <= critical;  // a borderline form is not significant
}

}  // namespace

bool significance_test(const Vector& d1_hat, const Matrix& p_d1,
                       const Vector& d2_hat, const Matrix& p_d2, double alpha1,
                       double alpha2) {
  const bool below1 = quad_form_below(d1_hat, p_d1, alpha1);
  const bool below2 = quad_form_below(d2_hat, p_d2, alpha2);
  return !(below1 && below2);
}

NismeBank::NismeBank(std::vector<ModeModel> models, BankConfig config)
    : models_(std::move(models)), config_(config) {
  require(!models_.empty(), "NismeBank: at least one mode is required");
  filters_.reserve(models_.size());
  for (const ModeModel& m : models_) {
    filters_.emplace_back(m, config_.nise);
  }
}

void NismeBank::init(const Vector& x0, const Matrix& p0, const Vector& y0,
                     const Vector& u0) {
  const int count = static_cast<int>(models_.size());
  state_.filters.clear();
  state_.filters.reserve(count);
  for (int i = 0; i < count; ++i) {
    state_.filters.push_back(filters_[i].init(x0, p0, y0, u0));
  }
  state_.posteriors = Vector::Constant(count, 1.0 / static_cast<double>(count));
  state_.map_mode = 0;
  state_.reported_mode = 0;
  state_.step = 0;
  state_.underflow_flagged = false;
  state_.quarantined.assign(count, 0);
  last_log_lik_.assign(count, 0.0);
}

int NismeBank::attack_free_counterpart(int mode_index) const {
  const int structural = models_[mode_index].structural_id;
  for (int i = 0; i < static_cast<int>(models_.size()); ++i) {
    if (models_[i].structural_id == structural && models_[i].signal_attack_free()) {
      return i;
    }
  }
  return -1;
}

JointEstimate NismeBank::step(const Vector& y, const InputSignal& u, double t_prev,
                              double dt) {
  const int count = static_cast<int>(models_.size());
  require(!state_.filters.empty(), "NismeBank: init() must run before step()");

  std::vector<StepOutput> outputs(count);
  std::vector<char> valid(count, 1);
  parallel_for(count, config_.threads, [&](int i) {
    try {
      outputs[i] = filters_[i].step(state_.filters[i], y, u, t_prev, dt);
    } catch (const NumericalError&) {
      valid[i] = 0;  // quarantine for this step, posterior frozen at the floor
    }
  });

  Vector log_lik(count);
  for (int i = 0; i < count; ++i) {
    log_lik(i) = valid[i] ? outputs[i].log_likelihood : 0.0;
    last_log_lik_[i] = log_lik(i);
    if (valid[i]) state_.filters[i] = outputs[i].state;
  }

  const PosteriorUpdate post = update_posteriors(
      state_.posteriors, log_lik, valid, config_.probability_floor);
  state_.posteriors = post.posteriors;
  state_.underflow_flagged = post.underflow;
  state_.quarantined = valid;
  for (auto& q : state_.quarantined) q = !q;

  const int map = select_mode(state_.posteriors);
  state_.map_mode = map;
  const FilterState& map_state = state_.filters[map];

  const bool significant =
      significance_test(map_state.d1_hat, map_state.p_d1, map_state.d2_hat,
                        map_state.p_d2, config_.alpha1, config_.alpha2);

  JointEstimate joint;
  joint.map_mode_id = models_[map].mode_id;
  joint.x_hat = map_state.x_hat;
  joint.posteriors = state_.posteriors;
  joint.attack_significant = significant;
  joint.map_log_likelihood = log_lik(map);

  int reported = map;
  if (significant) {
    joint.d1_hat = map_state.d1_hat;
    joint.d2_hat = map_state.d2_hat;
    joint.attack_location_estimate = map_state.attack_location_estimate();
  } else {
    const int free_mode = attack_free_counterpart(map);
    if (free_mode >= 0) {
      reported = free_mode;
    } else {
      joint.attack_free_mode_missing = true;
    }
    joint.d1_hat = Vector::Zero(map_state.d1_hat.size());
    joint.d2_hat = Vector::Zero(map_state.d2_hat.size());
    joint.attack_location_estimate = Vector::Zero(models_[map].signal_dim());
  }
  state_.reported_mode = reported;
  joint.reported_mode_id = models_[reported].mode_id;
  state_.step += 1;
  return joint;
}

}  // namespace nisme
