#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tsde/errors.hpp"
#include "tsde/linalg.hpp"

namespace tsde {

// Decreasing step-size sequences. The chain runs on a grid t_n = sum of the
// first n steps; everything downstream (checkpoint alignment, rate fits)
// assumes t_n is computed to sub-ulp accuracy, hence the compensated sums.

class StepSchedule {
 public:
  enum class Kind { polynomial, explicit_list };

  /// eta_n = eta / n^gamma with gamma in (0, 1]. The divergence of the grid
  /// (sum eta_n = infinity) is then automatic.
  static StepSchedule polynomial(double eta, double gamma) {
    if (!(eta > 0.0)) throw config_error("schedule: eta must be positive");
    if (!(gamma > 0.0) || gamma > 1.0) throw config_error("schedule: gamma must lie in (0, 1]");
    StepSchedule s;
    s.kind_ = Kind::polynomial;
    s.eta0_ = eta;
    s.gamma_ = gamma;
    return s;
  }

  static StepSchedule explicit_list(std::vector<double> etas) {
    if (etas.empty()) throw config_error("schedule: explicit list must be non-empty");
    for (std::size_t i = 0; i < etas.size(); ++i)
      if (!(etas[i] > 0.0))
        throw config_error("schedule: explicit step " + std::to_string(i + 1) +
                           " is not positive");
    StepSchedule s;
    s.kind_ = Kind::explicit_list;
    s.list_ = std::move(etas);
    return s;
  }

  Kind kind() const { return kind_; }
  double eta0() const { return eta0_; }
  double gamma() const { return gamma_; }

  /// Largest n for which eta(n) is defined (unbounded for the polynomial
  /// family).
  std::int64_t max_index() const {
    return kind_ == Kind::polynomial ? std::numeric_limits<std::int64_t>::max()
                                     : std::int64_t(list_.size());
  }

  double eta(std::int64_t n) const {
    if (n < 1) throw std::out_of_range("schedule: step index must be >= 1");
    if (kind_ == Kind::polynomial) return eta0_ / std::pow(double(n), gamma_);
    if (n > std::int64_t(list_.size()))
      throw std::out_of_range("schedule: explicit list has only " +
                              std::to_string(list_.size()) + " steps");
    return list_[std::size_t(n - 1)];
  }

  /// t_n = eta_1 + ... + eta_n, compensated; t_0 = 0.
  double grid_time(std::int64_t n) const {
    CompensatedSum t;
    for (std::int64_t k = 1; k <= n; ++k) t.add(eta(k));
    return t.value();
  }

 private:
  StepSchedule() = default;
  Kind kind_ = Kind::polynomial;
  double eta0_ = 0.0;
  double gamma_ = 0.0;
  std::vector<double> list_;
};

struct ScheduleReport {
  std::int64_t n_checked = 0;
  bool monotone_ok = false;
  bool vanishing_ok = false;
  bool divergence_ok = false;
  /// True when vanishing/divergence verdicts rest on finite-prefix proxies
  /// (explicit lists) rather than closed-form properties of the family.
  bool heuristic = false;
  double theta_min = 0.0;
  bool pass = false;
};

namespace detail {

/// (eta_{n-1} - eta_n) / eta_n^2, associated as ((a - b) / b) / b. For the
/// canonical eta/n family this evaluates the small cases exactly (e.g. the
/// n = 2 ratio of eta = 0.1 is 20, not 20 - 4 ulp).
inline double step_decrement_ratio(double prev, double cur) {
  return ((prev - cur) / cur) / cur;
}

}  // namespace detail

/// Smallest theta such that eta_{n-1} - eta_n <= theta * eta_n^2 for all
/// 2 <= n <= N. Throws on a non-monotone prefix, naming the first offender.
inline double theta_min(const StepSchedule& schedule, std::int64_t N) {
  if (N < 2) throw std::invalid_argument("theta_min: N must be >= 2");
  N = std::min(N, schedule.max_index());
  double best = 0.0;
  double prev = schedule.eta(1);
  for (std::int64_t n = 2; n <= N; ++n) {
    const double cur = schedule.eta(n);
    if (cur > prev)
      throw std::runtime_error("theta_min: schedule increases at index " + std::to_string(n));
    best = std::max(best, detail::step_decrement_ratio(prev, cur));
    prev = cur;
  }
  return best;
}

/// Checks a schedule prefix against the decreasing-step assumption:
/// non-increasing, vanishing, divergent grid, and the theta damping bound.
/// Failures are report fields, never exceptions.
inline ScheduleReport validate_schedule(const StepSchedule& schedule, std::int64_t N, double theta,
                                        double horizon) {
  if (N < 2) throw std::invalid_argument("validate_schedule: N must be >= 2");
  ScheduleReport r;
  r.n_checked = std::min(N, schedule.max_index());

  r.monotone_ok = true;
  double best = 0.0;
  double prev = schedule.eta(1);
  CompensatedSum t;
  t.add(prev);
  for (std::int64_t n = 2; n <= r.n_checked; ++n) {
    const double cur = schedule.eta(n);
    if (cur > prev) r.monotone_ok = false;
    best = std::max(best, detail::step_decrement_ratio(prev, cur));
    t.add(cur);
    prev = cur;
  }
  r.theta_min = best;

  if (schedule.kind() == StepSchedule::Kind::polynomial) {
    // eta/n^gamma with gamma in (0,1]: vanishing and divergence hold in
    // closed form.
    r.vanishing_ok = true;
    r.divergence_ok = true;
    r.heuristic = false;
  } else {
    r.vanishing_ok = schedule.eta(r.n_checked) < schedule.eta(1);
    r.divergence_ok = t.value() >= horizon;
    r.heuristic = true;
  }

  r.pass = r.monotone_ok && r.vanishing_ok && r.divergence_ok && r.theta_min <= theta;
  return r;
}

}  // namespace tsde
