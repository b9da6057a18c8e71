#include "tsde/probes.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

namespace {

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using tsde::StepSchedule;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

TEST_CASE("weighted_step_sums frozen oracle values") {
  const auto s = StepSchedule::polynomial(0.1, 0.6);

  const auto w100 = tsde::weighted_step_sums(s, 0.25, 0.5, 100);
  CHECK_THAT(w100.exp_weighted, WithinRel(0.361971545090293, 1e-9));
  CHECK_THAT(w100.window_sqrt, WithinRel(0.603518962665401, 1e-9));
  CHECK_THAT(w100.window_lin, WithinRel(1.69367389368621, 1e-9));
  CHECK(w100.window_start == 8);
  CHECK_FALSE(w100.window_empty);

  const auto w1000 = tsde::weighted_step_sums(s, 0.25, 0.5, 1000);
  CHECK_THAT(w1000.exp_weighted, WithinRel(0.422953472533271, 1e-9));
  CHECK_THAT(w1000.window_sqrt, WithinRel(0.40152423049889, 1e-9));
  CHECK_THAT(w1000.window_lin, WithinRel(1.4226305208714, 1e-9));
  CHECK(w1000.window_start == 484);

  // Single term: exp weight is e^0.
  const auto w1 = tsde::weighted_step_sums(s, 0.25, 0.5, 1);
  CHECK_THAT(w1.exp_weighted, WithinRel(std::pow(0.1, 1.25), 1e-12));

  // Grid still inside the unit window: both window sums vanish by convention.
  const auto w3 = tsde::weighted_step_sums(s, 0.25, 0.5, 3);
  CHECK(w3.window_empty);
  CHECK(w3.window_sqrt == 0.0);
  CHECK(w3.window_lin == 0.0);
  CHECK_THAT(w3.exp_weighted, WithinRel(0.11027286694688837, 1e-9));
}

TEST_CASE("weighted_step_sums ratio stability across decades") {
  const auto s = StepSchedule::polynomial(0.1, 0.6);
  double lo1 = 1e300, hi1 = 0, lo2 = 1e300, hi2 = 0, lo3 = 1e300, hi3 = 0;
  for (std::int64_t n : {1000, 10000, 100000}) {
    const auto w = tsde::weighted_step_sums(s, 0.25, 0.5, n);
    lo1 = std::min(lo1, w.exp_ratio);
    hi1 = std::max(hi1, w.exp_ratio);
    lo2 = std::min(lo2, w.sqrt_ratio);
    hi2 = std::max(hi2, w.sqrt_ratio);
    lo3 = std::min(lo3, w.lin_ratio);
    hi3 = std::max(hi3, w.lin_ratio);
  }
  CHECK(hi1 / lo1 <= 3.0);
  CHECK(hi2 / lo2 <= 3.0);
  CHECK(hi3 / lo3 <= 3.0);
}

TEST_CASE("weighted_step_sums term monotonicity in beta and c") {
  // Every term eta^{1+beta} (eta < 1) shrinks as beta grows, and the
  // exponential weight shrinks as c grows; the sums inherit both directions.
  const auto s = StepSchedule::polynomial(0.1, 0.6);
  const std::int64_t n = 500;
  for (double c : {0.25, 0.5, 1.0}) {
    double prev1 = 1e300, prev2 = 1e300, prev3 = 1e300;
    for (double beta : {0.1, 0.25, 0.4, 0.5}) {
      const auto w = tsde::weighted_step_sums(s, beta, c, n);
      CHECK(w.exp_weighted <= prev1 + 1e-15);
      CHECK(w.window_sqrt <= prev2 + 1e-15);
      CHECK(w.window_lin <= prev3 + 1e-15);
      prev1 = w.exp_weighted;
      prev2 = w.window_sqrt;
      prev3 = w.window_lin;
    }
  }
  for (double beta : {0.1, 0.25, 0.5}) {
    double prev = 1e300;
    for (double c : {0.25, 0.5, 1.0, 2.0}) {
      const auto w = tsde::weighted_step_sums(s, beta, c, 500);
      CHECK(w.exp_weighted <= prev + 1e-15);
      prev = w.exp_weighted;
    }
  }
}

TEST_CASE("weighted_step_sums damping hypothesis report") {
  // Steep harmonic-like decay: theta_min ~ 7.8 over this prefix, far above
  // c e^{-c}/beta ~ 1.21, so the sufficient condition is reported violated.
  CHECK_FALSE(tsde::weighted_step_sums(StepSchedule::polynomial(0.1, 0.6), 0.25, 0.5, 100)
                  .damping_ok);
  // Constant explicit list: theta_min = 0 < any positive threshold.
  CHECK(tsde::weighted_step_sums(StepSchedule::explicit_list({0.5, 0.5, 0.5, 0.5}), 0.25, 0.5, 4)
            .damping_ok);

  CHECK_THROWS_AS(tsde::weighted_step_sums(StepSchedule::polynomial(0.1, 0.6), 0.75, 0.5, 10),
                  std::invalid_argument);
  CHECK_THROWS_AS(tsde::weighted_step_sums(StepSchedule::polynomial(0.1, 0.6), 0.25, -1.0, 10),
                  std::invalid_argument);
}

TEST_CASE("gaussian_tail_probe matches the 1D closed form") {
  // xi ~ N(1, eta) with eta = 0.01. Outside the 1/3-ball around the mean,
  // E[e^xi; xi > 4/3] + E[e^xi; xi < 2/3] has a Gaussian closed form
  // (|xi| != xi only with probability ~1e-23, far below MC resolution).
  const double eta = 0.01, mu = 1.0, sd = std::sqrt(eta);
  auto upper = [&](double a) {  // E[e^xi; xi > a]
    return std::exp(mu + eta / 2.0) * normal_cdf((mu + eta - a) / sd);
  };
  auto lower = [&](double a) {  // E[e^xi; xi < a]
    return std::exp(mu + eta / 2.0) * normal_cdf((a - mu - eta) / sd);
  };
  const double closed_out = upper(mu + 1.0 / 3.0) + lower(mu - 1.0 / 3.0);
  const double closed_in = std::exp(mu + eta / 2.0) - closed_out;

  Eigen::VectorXd m(1);
  m << mu;
  const auto probe = tsde::gaussian_tail_probe(m, Eigen::MatrixXd::Identity(1, 1), eta, 200000, 5);
  CHECK_THAT(probe.lhs_outside, WithinAbs(closed_out, 3.0 * probe.se_outside + 1e-12));
  CHECK_THAT(probe.lhs_inside, WithinAbs(closed_in, 3.0 * probe.se_inside + 1e-12));
  CHECK(probe.inside_applicable);
  CHECK(std::isfinite(probe.c_inside));
  CHECK(probe.c_outside == probe.lhs_outside / (eta * std::exp(mu)));

  // Tiny step: the ball captures essentially all mass.
  const auto tiny = tsde::gaussian_tail_probe(m, Eigen::MatrixXd::Identity(1, 1), 1e-4, 10000, 5);
  CHECK(tiny.lhs_outside == 0.0);

  // Mean too close to the origin: the inside bound does not apply.
  Eigen::VectorXd half(1);
  half << 0.5;
  const auto na = tsde::gaussian_tail_probe(half, Eigen::MatrixXd::Identity(1, 1), eta, 10000, 5);
  CHECK_FALSE(na.inside_applicable);
  CHECK(std::isnan(na.c_inside));

  CHECK_THROWS_WITH(tsde::gaussian_tail_probe(m, Eigen::MatrixXd::Identity(1, 1), 0.2, 10000, 5),
                    Catch::Matchers::ContainsSubstring("1/6"));
  CHECK_THROWS_AS(tsde::gaussian_tail_probe(m, Eigen::MatrixXd::Identity(1, 1), eta, 100, 5),
                  std::invalid_argument);
}

TEST_CASE("rate_fit worked examples") {
  std::vector<std::pair<double, double>> exact;
  for (double e : {0.4, 0.2, 0.1, 0.05, 0.025})
    exact.push_back({e, 2.0 * std::pow(e, 0.3)});
  const auto f = tsde::rate_fit(exact);
  CHECK_THAT(f.slope, WithinAbs(0.3, 1e-10));
  CHECK_THAT(f.intercept, WithinAbs(std::log(2.0), 1e-10));
  CHECK_THAT(f.r_squared, WithinAbs(1.0, 1e-10));
  CHECK(f.n_points == 5);

  std::vector<std::pair<double, double>> flat{{0.4, 1.5}, {0.2, 1.5}, {0.1, 1.5}};
  CHECK_THAT(tsde::rate_fit(flat).slope, WithinAbs(0.0, 1e-14));

  CHECK_THROWS_AS(tsde::rate_fit({{0.1, 1.0}, {0.2, 2.0}}), std::invalid_argument);
  CHECK_THROWS_AS(tsde::rate_fit({{0.1, 1.0}, {0.2, -2.0}, {0.3, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(tsde::rate_fit({{0.1, 1.0}, {0.1, 2.0}, {0.1, 3.0}}), std::invalid_argument);
}

TEST_CASE("rate_fit under bounded multiplicative noise") {
  // eta^{0.25} with +-5% uniform noise, 8 points per decade over 2 decades.
  std::vector<std::pair<double, double>> pts;
  int i = 0;
  for (double e = 1.0; e >= 0.01 * 0.999; e *= std::pow(10.0, -1.0 / 8.0)) {
    const double u = tsde::uniform_at(77, 1, std::uint32_t(i++), 0, 0);
    pts.push_back({e, std::pow(e, 0.25) * (1.0 + 0.05 * (2.0 * u - 1.0))});
  }
  REQUIRE(pts.size() >= 16);
  const auto f = tsde::rate_fit(pts);
  CHECK(f.slope >= 0.20);
  CHECK(f.slope <= 0.30);

  // Rescaling distances shifts the intercept, never the slope.
  std::vector<std::pair<double, double>> scaled = pts;
  for (auto& [e, v] : scaled) v *= 7.25;
  const auto g = tsde::rate_fit(scaled);
  CHECK_THAT(g.slope, WithinAbs(f.slope, 1e-12));
  CHECK_THAT(g.intercept, WithinAbs(f.intercept + std::log(7.25), 1e-10));
}

TEST_CASE("spearman_rho trend statistic") {
  CHECK_THAT(tsde::spearman_rho({1, 2, 3, 4}, {10, 20, 30, 40}), WithinAbs(1.0, 1e-14));
  CHECK_THAT(tsde::spearman_rho({1, 2, 3, 4}, {8, 6, 4, 2}), WithinAbs(-1.0, 1e-14));
  // Monotone in rank even when nonlinear in value.
  CHECK_THAT(tsde::spearman_rho({1, 2, 3, 4, 5}, {1, 8, 27, 64, 125}), WithinAbs(1.0, 1e-14));
  // Ties get average ranks; a flat series correlates with nothing.
  CHECK(tsde::spearman_rho({1, 2, 3, 4}, {5, 5, 5, 5}) == 0.0);
  const double with_tie = tsde::spearman_rho({1, 2, 3, 4}, {1, 2, 2, 3});
  CHECK(with_tie > 0.9);
  CHECK_THROWS_AS(tsde::spearman_rho({1, 2}, {1}), std::invalid_argument);
}

}  // namespace
