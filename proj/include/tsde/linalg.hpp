#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace tsde {

/// Spectral norm via power iteration on A^T A. Deterministic: normalized
/// all-ones start vector, relative tolerance 1e-12, at most 200 iterations.
/// 1x1 input short-circuits to |a|.
inline double operator_norm(const Eigen::Ref<const Eigen::MatrixXd>& a) {
  if (a.rows() == 0 || a.cols() == 0) throw std::invalid_argument("operator_norm: empty matrix");
  if (a.rows() == 1 && a.cols() == 1) return std::abs(a(0, 0));

  const Eigen::MatrixXd b = a.transpose() * a;
  const Eigen::Index d = b.rows();
  Eigen::VectorXd v = Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(double(d)));
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd w = b * v;
    const double norm = w.norm();
    if (norm <= 0.0 || !std::isfinite(norm)) return 0.0;
    const double next = v.dot(w);
    v = w / norm;
    if (it > 0 && std::abs(next - lambda) <= 1e-12 * std::max(1.0, std::abs(next))) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(0.0, lambda));
}

/// Inverse for the small dense matrices used by diffusion fields. Throws on a
/// numerically singular input (condition estimate above 1e12).
inline Eigen::MatrixXd small_inverse(const Eigen::Ref<const Eigen::MatrixXd>& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("small_inverse: square input required");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw std::runtime_error("small_inverse: singular matrix");
  Eigen::MatrixXd inv = lu.inverse();
  const double cond = operator_norm(a) * operator_norm(inv);
  if (!std::isfinite(cond) || cond > 1e12) throw std::runtime_error("small_inverse: singular matrix");
  return inv;
}

namespace detail {
inline double pairwise_sum_impl(std::span<const double> xs) {
  if (xs.size() <= 16) {
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum_impl(xs.first(half)) + pairwise_sum_impl(xs.subspan(half));
}
}  // namespace detail

/// Fixed-order pairwise summation. The reduction tree depends only on the
/// element order, so aggregates stay bit-identical for any thread count.
inline double pairwise_sum(std::span<const double> xs) { return detail::pairwise_sum_impl(xs); }

inline double pairwise_mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("pairwise_mean: empty input");
  return pairwise_sum(xs) / double(xs.size());
}

/// Neumaier compensated accumulator; used wherever grid times are summed so
/// that long schedules do not drift.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace tsde
