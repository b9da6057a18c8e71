#include "tsde/linalg.hpp"

#include <Eigen/Dense>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

namespace {

TEST_CASE("operator norm matches closed forms") {
  Eigen::MatrixXd a(1, 1);
  a << -3.5;
  CHECK(tsde::operator_norm(a) == 3.5);

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
  d.diagonal() << 1.0, -4.0, 2.0;
  CHECK_THAT(tsde::operator_norm(d), Catch::Matchers::WithinRel(4.0, 1e-10));

  // Rotation times scaling: spectral norm is the largest scale factor.
  const double th = 0.3;
  Eigen::MatrixXd r(2, 2);
  r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2, 2);
  s.diagonal() << 5.0, 0.5;
  CHECK_THAT(tsde::operator_norm(r * s), Catch::Matchers::WithinRel(5.0, 1e-10));

  // Rank-one rectangular case: norm is |u||v|.
  Eigen::VectorXd u(3), v(2);
  u << 1, 2, 2;
  v << 3, 4;
  Eigen::MatrixXd m = u * v.transpose();
  CHECK_THAT(tsde::operator_norm(m), Catch::Matchers::WithinRel(15.0, 1e-10));

  CHECK(tsde::operator_norm(Eigen::MatrixXd::Zero(2, 3)) == 0.0);
}

TEST_CASE("small_inverse inverts and guards conditioning") {
  Eigen::MatrixXd m(2, 2);
  m << 2, 1, 1, 3;
  const Eigen::MatrixXd inv = tsde::small_inverse(m);
  CHECK((m * inv - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-12);

  Eigen::MatrixXd sing(2, 2);
  sing << 1, 2, 2, 4;
  CHECK_THROWS_AS(tsde::small_inverse(sing), std::runtime_error);
}

TEST_CASE("pairwise_sum is order-fixed and accurate") {
  std::vector<double> v(1000);
  for (int i = 0; i < 1000; ++i) v[i] = 1.0 / (i + 1.0);
  const double s = tsde::pairwise_sum(v);
  const double s2 = tsde::pairwise_sum(v);
  CHECK(s == s2);  // deterministic: same bits every call
  // Compare against a compensated reference.
  tsde::CompensatedSum ref;
  for (double x : v) ref.add(x);
  CHECK_THAT(s, Catch::Matchers::WithinAbs(ref.value(), 1e-12));

  CHECK(tsde::pairwise_sum(std::span<const double>{}) == 0.0);
  const double one[] = {42.0};
  CHECK(tsde::pairwise_sum(one) == 42.0);
  CHECK(tsde::pairwise_mean(v) == s / 1000.0);
}

TEST_CASE("compensated accumulation beats naive on hostile input") {
  // 1 + 1e16 - 1e16 in naive order loses the 1.
  tsde::CompensatedSum cs;
  cs.add(1.0);
  cs.add(1e16);
  cs.add(-1e16);
  CHECK(cs.value() == 1.0);
}

}  // namespace
