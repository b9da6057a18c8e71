#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tsde/linalg.hpp"
#include "tsde/rng.hpp"
#include "tsde/step_schedule.hpp"

namespace tsde {

// Numeric probes for the analytic ingredients behind the uniform-in-time
// rates: decaying weighted sums over the step sequence, Gaussian tail
// expectations, and the log-log rate fit the experiments report. The theory
// asserts existence of constants, so probes measure ratio stability against
// explicit tolerances rather than absolute levels.

struct WeightedStepSums {
  double exp_weighted = 0.0;  // sum_{k<=n} eta_k^{1+beta} e^{-c (t_n - t_k)}
  double window_sqrt = 0.0;   // sum over the trailing unit window, 1/sqrt weight
  double window_lin = 0.0;    // same window, 1/(t_n - t_k) weight
  double exp_ratio = 0.0;     // exp_weighted / eta_n^beta
  double sqrt_ratio = 0.0;    // window_sqrt / eta_n^beta
  double lin_ratio = 0.0;     // window_lin / (eta_n^beta |ln eta_n|)
  std::int64_t window_start = 0;  // min k with t_n - t_k <= 1
  bool window_empty = false;      // t_n <= 1: window sums vanish by convention
  bool damping_ok = false;        // theta_min < c e^{-c} / beta over the prefix
};

/// Direct evaluation of the three weighted sums whose boundedness (relative
/// to eta_n^beta, resp. eta_n^beta |ln eta_n|) drives the uniform-in-time
/// estimates. The trailing-window start is found by binary search on
/// compensated grid times.
inline WeightedStepSums weighted_step_sums(const StepSchedule& schedule, double beta, double c,
                                           std::int64_t n) {
  if (n < 1) throw std::invalid_argument("weighted_step_sums: n must be >= 1");
  if (!(beta > 0.0) || beta > 0.5)
    throw std::invalid_argument("weighted_step_sums: beta must lie in (0, 1/2]");
  if (!(c > 0.0)) throw std::invalid_argument("weighted_step_sums: c must be > 0");

  std::vector<double> eta(static_cast<std::size_t>(n));
  std::vector<double> time(static_cast<std::size_t>(n) + 1);
  CompensatedSum acc;
  time[0] = 0.0;
  for (std::int64_t k = 1; k <= n; ++k) {
    const double e = schedule.eta(k);
    eta[std::size_t(k - 1)] = e;
    acc.add(e);
    time[std::size_t(k)] = acc.value();
  }
  const double t_n = time[std::size_t(n)];
  const double eta_n = eta[std::size_t(n - 1)];

  WeightedStepSums out;
  out.damping_ok = n >= 2 && theta_min(schedule, n) < c * std::exp(-c) / beta;

  std::vector<double> terms(static_cast<std::size_t>(n));
  for (std::int64_t k = 1; k <= n; ++k)
    terms[std::size_t(k - 1)] =
        std::pow(eta[std::size_t(k - 1)], 1.0 + beta) * std::exp(-c * (t_n - time[std::size_t(k)]));
  out.exp_weighted = pairwise_sum(terms);
  out.exp_ratio = out.exp_weighted / std::pow(eta_n, beta);

  if (t_n <= 1.0) {
    out.window_empty = true;
    out.window_start = 0;
    return out;
  }
  // min k >= 1 with t_n - t_k <= 1, i.e. first grid time >= t_n - 1.
  const auto it = std::lower_bound(time.begin() + 1, time.begin() + n + 1, t_n - 1.0);
  out.window_start = it - time.begin();

  std::vector<double> sq, li;
  sq.reserve(std::size_t(n - out.window_start + 1));
  li.reserve(std::size_t(n - out.window_start + 1));
  for (std::int64_t k = out.window_start; k <= n - 1; ++k) {
    const double gap = t_n - time[std::size_t(k)];
    const double w = std::pow(eta[std::size_t(k - 1)], 1.0 + beta);
    sq.push_back(w / std::sqrt(gap));
    li.push_back(w / gap);
  }
  out.window_sqrt = pairwise_sum(sq);
  out.window_lin = pairwise_sum(li);
  out.sqrt_ratio = out.window_sqrt / std::pow(eta_n, beta);
  out.lin_ratio = out.window_lin / (std::pow(eta_n, beta) * std::abs(std::log(eta_n)));
  return out;
}

struct GaussianTailProbe {
  double lhs_outside = 0.0;  // E[ e^{|xi|} ; |xi - mu| > 1/3 ]
  double se_outside = 0.0;
  double c_outside = 0.0;  // lhs_outside / (eta e^{|mu|})
  bool inside_applicable = false;  // requires |mu| >= 2/3
  double lhs_inside = 0.0;  // E[ e^{|xi|} ; |xi - mu| <= 1/3 ]
  double se_inside = 0.0;
  double c_inside = std::numeric_limits<double>::quiet_NaN();  // (ln lhs_inside - |mu|) / eta
};

/// Monte Carlo for the two tail expectations of xi ~ N(mu, eta Sigma): the
/// contribution outside the 1/3-ball around the mean (should scale like eta)
/// and the contribution inside (log-close to |mu| when |mu| >= 2/3).
inline GaussianTailProbe gaussian_tail_probe(const Eigen::VectorXd& mu,
                                             const Eigen::MatrixXd& Sigma, double eta,
                                             std::int64_t M, std::uint64_t seed) {
  const int d = int(mu.size());
  if (Sigma.rows() != d || Sigma.cols() != d)
    throw std::invalid_argument("gaussian_tail_probe: Sigma shape mismatch");
  if (M < 10000) throw std::invalid_argument("gaussian_tail_probe: M must be >= 1e4");
  if (!(eta > 0.0)) throw std::invalid_argument("gaussian_tail_probe: eta must be > 0");
  if (eta * operator_norm(Sigma) > 1.0 / 6.0)
    throw std::invalid_argument(
        "gaussian_tail_probe: hypothesis eta * ||Sigma|| <= 1/6 violated");

  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("gaussian_tail_probe: Sigma must be positive definite");
  const Eigen::MatrixXd root = std::sqrt(eta) * Eigen::MatrixXd(llt.matrixL());

  const double mu_norm = mu.norm();
  const std::uint32_t tag = stream_tag(Stream::probe_mc, 3);
  std::vector<double> outside(static_cast<std::size_t>(M));
  std::vector<double> inside(static_cast<std::size_t>(M));
  Eigen::VectorXd z(d), xi(d);
  for (std::int64_t i = 0; i < M; ++i) {
    normal_fill(seed, tag, std::uint32_t(i), 0, z.data(), d);
    xi = mu + root * z;
    const double weight = std::exp(xi.norm());
    const bool out_ball = (xi - mu).norm() > 1.0 / 3.0;
    outside[std::size_t(i)] = out_ball ? weight : 0.0;
    inside[std::size_t(i)] = out_ball ? 0.0 : weight;
  }

  auto mean_se = [M](const std::vector<double>& v) {
    const double m = pairwise_mean(v);
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double c = v[i] - m;
      sq[i] = c * c;
    }
    const double var = pairwise_sum(sq) / double(M - 1);
    return std::pair<double, double>{m, std::sqrt(var / double(M))};
  };

  GaussianTailProbe out;
  std::tie(out.lhs_outside, out.se_outside) = mean_se(outside);
  out.c_outside = out.lhs_outside / (eta * std::exp(mu_norm));
  out.inside_applicable = mu_norm >= 2.0 / 3.0;
  std::tie(out.lhs_inside, out.se_inside) = mean_se(inside);
  if (out.inside_applicable && out.lhs_inside > 0.0)
    out.c_inside = (std::log(out.lhs_inside) - mu_norm) / eta;
  return out;
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;  // ln of the fitted constant
  double r_squared = 0.0;
  std::int64_t n_points = 0;
};

/// Least squares of ln(distance) on ln(eta): the empirical convergence rate.
inline RateFit rate_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw std::invalid_argument("rate_fit: need at least 3 points");
  for (const auto& [e, v] : points)
    if (!(e > 0.0) || !(v > 0.0))
      throw std::invalid_argument("rate_fit: all etas and distances must be positive");

  const std::size_t n = points.size();
  double mx = 0, my = 0;
  for (const auto& [e, v] : points) {
    mx += std::log(e);
    my += std::log(v);
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [e, v] : points) {
    const double dx = std::log(e) - mx;
    const double dy = std::log(v) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0.0) throw std::invalid_argument("rate_fit: etas must not be all equal");

  RateFit out;
  out.n_points = std::int64_t(n);
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double ss_res = 0;
  for (const auto& [e, v] : points) {
    const double r = std::log(v) - (out.intercept + out.slope * std::log(e));
    ss_res += r * r;
  }
  out.r_squared = syy <= 1e-30 ? 1.0 : std::max(0.0, 1.0 - ss_res / syy);
  return out;
}

/// Spearman rank correlation; the monotone-trend statistic used for the TV
/// series (ties get average ranks).
inline double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("spearman_rho: need two equal-length series");
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * (double(i) + double(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(xs), ry = ranks(ys);
  const double n = double(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace tsde
