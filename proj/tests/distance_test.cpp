#include "tsde/distance.hpp"

#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numeric>
#include <vector>

namespace {

using Catch::Matchers::WithinAbs;
using tsde::make_ensemble_1d;

std::vector<double> random_vals(std::uint32_t stream, int n, double scale = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; i += 2) {
    const auto p = tsde::normal_pair(555, tsde::stream_tag(tsde::Stream::probe_mc, stream),
                                     std::uint32_t(i), 0, 0);
    v[std::size_t(i)] = scale * p[0];
    if (i + 1 < n) v[std::size_t(i + 1)] = scale * p[1];
  }
  return v;
}

TEST_CASE("wasserstein1_1d worked examples") {
  const auto a = make_ensemble_1d({0.0, 2.0});
  const auto b = make_ensemble_1d({1.0, 3.0});
  CHECK(tsde::wasserstein1_1d(a, b) == 1.0);
  CHECK(tsde::wasserstein1_1d(a, a) == 0.0);
  // Sorting is what makes this exact: reversed input, same answer.
  const auto a2 = make_ensemble_1d({2.0, 0.0});
  CHECK(tsde::wasserstein1_1d(a2, b) == 1.0);

  const auto c = make_ensemble_1d({0.0, 1.0, 2.0});
  CHECK_THROWS_AS(tsde::wasserstein1_1d(a, c), std::invalid_argument);
}

TEST_CASE("wasserstein1_1d equals the exhaustive assignment oracle") {
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 2 + trial % 7;  // 2..8
    auto av = random_vals(std::uint32_t(2 * trial), m);
    auto bv = random_vals(std::uint32_t(2 * trial + 1), m);
    const double fast =
        tsde::wasserstein1_1d(make_ensemble_1d(av), make_ensemble_1d(bv));

    std::vector<int> idx(static_cast<std::size_t>(m));
    std::iota(idx.begin(), idx.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double tot = 0;
      for (int i = 0; i < m; ++i) tot += std::abs(av[std::size_t(i)] - bv[std::size_t(idx[std::size_t(i)])]);
      best = std::min(best, tot / m);
    } while (std::next_permutation(idx.begin(), idx.end()));
    REQUIRE_THAT(fast, WithinAbs(best, 1e-12));
  }
}

TEST_CASE("wasserstein1_1d metric properties") {
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = make_ensemble_1d(random_vals(std::uint32_t(100 + 3 * trial), 64));
    const auto b = make_ensemble_1d(random_vals(std::uint32_t(101 + 3 * trial), 64));
    const auto c = make_ensemble_1d(random_vals(std::uint32_t(102 + 3 * trial), 64));
    const double ab = tsde::wasserstein1_1d(a, b);
    const double ba = tsde::wasserstein1_1d(b, a);
    const double ac = tsde::wasserstein1_1d(a, c);
    const double cb = tsde::wasserstein1_1d(c, b);
    CHECK_THAT(ab, WithinAbs(ba, 1e-12));
    CHECK(ab <= ac + cb + 1e-12);
  }
}

TEST_CASE("sliced_wasserstein1 reduces to exact 1D and handles point masses") {
  const auto a = make_ensemble_1d(random_vals(7, 50));
  const auto b = make_ensemble_1d(random_vals(8, 50));
  CHECK(tsde::sliced_wasserstein1(a, b, 16, 3) == tsde::wasserstein1_1d(a, b));

  // Two point masses at distance 1 in the plane: sliced W1 -> E|u_1| = 2/pi.
  tsde::PathEnsemble pa, pb;
  pa.dim = pb.dim = 2;
  pa.samples = Eigen::MatrixXd::Zero(4096, 2);
  pb.samples = Eigen::MatrixXd::Zero(4096, 2);
  pb.samples.col(0).setConstant(1.0);
  const double est = tsde::sliced_wasserstein1(pa, pb, 4096, 17);
  CHECK_THAT(est, WithinAbs(2.0 / M_PI, 0.02 * 2.0 / M_PI));
  CHECK(tsde::sliced_wasserstein1(pa, pa, 64, 17) == 0.0);
}

TEST_CASE("sliced_wasserstein1 is translation-consistent") {
  tsde::PathEnsemble a, b;
  a.dim = b.dim = 2;
  a.samples.resize(40, 2);
  b.samples.resize(40, 2);
  const auto ax = random_vals(11, 40), ay = random_vals(12, 40);
  const auto bx = random_vals(13, 40), by = random_vals(14, 40);
  for (int i = 0; i < 40; ++i) {
    a.samples(i, 0) = ax[std::size_t(i)];
    a.samples(i, 1) = ay[std::size_t(i)];
    b.samples(i, 0) = bx[std::size_t(i)];
    b.samples(i, 1) = by[std::size_t(i)];
  }
  const double base = tsde::sliced_wasserstein1(a, b, 32, 5);
  tsde::PathEnsemble a2 = a, b2 = b;
  a2.samples.col(0).array() += 17.5;
  a2.samples.col(1).array() -= 3.25;
  b2.samples.col(0).array() += 17.5;
  b2.samples.col(1).array() -= 3.25;
  CHECK_THAT(tsde::sliced_wasserstein1(a2, b2, 32, 5), WithinAbs(base, 1e-10));
}

TEST_CASE("tv_histogram worked example and bounds") {
  const auto a = make_ensemble_1d({0.0, 0.0, 1.0, 1.0});
  const auto b = make_ensemble_1d({0.0, 1.0, 1.0, 1.0});
  CHECK_THAT(tsde::tv_histogram(a, b, 2), WithinAbs(0.25, 1e-14));
  CHECK(tsde::tv_histogram(a, a, 2) == 0.0);

  // Disjoint supports: mass never shares a cell.
  const auto lo = make_ensemble_1d({0.0, 0.1, 0.2, 0.3});
  const auto hi = make_ensemble_1d({10.0, 10.1, 10.2, 10.3});
  CHECK_THAT(tsde::tv_histogram(lo, hi, 16), WithinAbs(1.0, 1e-14));

  // Symmetry, range, unequal sizes allowed.
  const auto u = make_ensemble_1d(random_vals(21, 300));
  const auto w = make_ensemble_1d(random_vals(22, 200, 1.3));
  const double tv = tsde::tv_histogram(u, w);
  CHECK(tv >= 0.0);
  CHECK(tv <= 1.0);
  CHECK(tsde::tv_histogram(w, u) == tv);

  tsde::PathEnsemble big;
  big.dim = 4;
  big.samples = Eigen::MatrixXd::Zero(8, 4);
  CHECK_THROWS_AS(tsde::tv_histogram(big, big, 4), std::invalid_argument);
}

TEST_CASE("tv_histogram never decreases under nested refinement") {
  const auto a = make_ensemble_1d(random_vals(31, 500));
  const auto b = make_ensemble_1d(random_vals(32, 500, 1.2));
  double prev = tsde::tv_histogram(a, b, 8);
  for (int bins : {16, 32, 64}) {
    const double cur = tsde::tv_histogram(a, b, bins);
    CHECK(cur >= prev - 1e-14);
    prev = cur;
  }
}

TEST_CASE("lyapunov_moment closed values and floor") {
  const auto zeros = make_ensemble_1d({0.0, 0.0, 0.0, 0.0});
  CHECK_THAT(tsde::lyapunov_moment(zeros, 3.0).value, WithinAbs(std::exp(9.0 / 8.0), 1e-12));
  const auto twos = make_ensemble_1d({2.0, -2.0, 2.0, -2.0});
  CHECK_THAT(tsde::lyapunov_moment(twos, 1.0).value, WithinAbs(std::exp(2.0), 1e-12));

  const auto mixed = make_ensemble_1d(random_vals(41, 100));
  const auto est = tsde::lyapunov_moment(mixed, 2.0);
  CHECK(est.value >= std::exp(2.0 * 3.0 / 8.0));
  CHECK(est.standard_error > 0.0);
  CHECK_FALSE(est.saturated);

  const auto huge = make_ensemble_1d({800.0, 0.0});
  CHECK(tsde::lyapunov_moment(huge, 1.0).saturated);
}

}  // namespace
