#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsde/linalg.hpp"
#include "tsde/rng.hpp"
#include "tsde/sde_model.hpp"

namespace tsde {

// Empirical distances between endpoint ensembles. In one dimension the
// order-statistics coupling makes W1 exact; in higher dimension we average
// exact 1D transports over random projections. TV uses a common histogram
// grid — positively biased for continuous laws, so downstream checks read its
// trend, not its level.

struct EnsembleMeta {
  std::uint64_t master_seed = 0;
  std::uint32_t stream_tag = 0;
  std::string schedule_desc;
};

struct PathEnsemble {
  int dim = 1;
  Eigen::MatrixXd samples;  // one row per sample, dim columns
  double checkpoint_time = 0.0;
  EnsembleMeta meta;

  std::int64_t size() const { return samples.rows(); }
};

namespace detail {

inline void require_comparable(const PathEnsemble& a, const PathEnsemble& b, bool equal_sizes) {
  if (a.dim != b.dim) throw std::invalid_argument("ensembles have different dimensions");
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("ensembles need M >= 2");
  if (equal_sizes && a.size() != b.size())
    throw std::invalid_argument("ensembles must have equal sizes (resampling is the caller's job)");
}

inline double sorted_w1(std::vector<double>& a, std::vector<double>& b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> gaps(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) gaps[i] = std::abs(a[i] - b[i]);
  return pairwise_mean(gaps);
}

}  // namespace detail

/// Exact 1D Wasserstein-1 between equal-size empirical measures: mean gap of
/// the order statistics.
inline double wasserstein1_1d(const PathEnsemble& a, const PathEnsemble& b) {
  detail::require_comparable(a, b, true);
  if (a.dim != 1) throw std::invalid_argument("wasserstein1_1d: dim must be 1");
  std::vector<double> av(a.samples.col(0).begin(), a.samples.col(0).end());
  std::vector<double> bv(b.samples.col(0).begin(), b.samples.col(0).end());
  return detail::sorted_w1(av, bv);
}

/// Average of exact 1D transports over random unit directions; reduces to
/// wasserstein1_1d exactly when dim = 1 (projection by a sign).
inline double sliced_wasserstein1(const PathEnsemble& a, const PathEnsemble& b,
                                  int n_projections = 64, std::uint64_t seed = 1) {
  detail::require_comparable(a, b, true);
  if (a.dim == 1) return wasserstein1_1d(a, b);
  if (n_projections < 1) throw std::invalid_argument("sliced_wasserstein1: need projections");

  const std::uint32_t tag = stream_tag(Stream::projection);
  Eigen::VectorXd u(a.dim);
  std::vector<double> av(static_cast<std::size_t>(a.size()));
  std::vector<double> bv(static_cast<std::size_t>(b.size()));
  std::vector<double> per_proj(static_cast<std::size_t>(n_projections));
  for (int j = 0; j < n_projections; ++j) {
    double norm = 0.0;
    std::uint32_t attempt = 0;
    do {
      normal_fill(seed, tag, std::uint32_t(j), attempt++, u.data(), a.dim);
      norm = u.norm();
    } while (norm == 0.0);
    u /= norm;
    Eigen::Map<Eigen::VectorXd>(av.data(), a.size()) = a.samples * u;
    Eigen::Map<Eigen::VectorXd>(bv.data(), b.size()) = b.samples * u;
    per_proj[std::size_t(j)] = detail::sorted_w1(av, bv);
  }
  return pairwise_mean(per_proj);
}

/// Histogram total variation on a common rectangular grid covering the pooled
/// range expanded by 2.5% on each side. bins_per_dim = 0 selects
/// ceil(M^{1/3}) clamped to [8, 256]. Unequal sizes are allowed.
inline double tv_histogram(const PathEnsemble& a, const PathEnsemble& b, int bins_per_dim = 0) {
  detail::require_comparable(a, b, false);
  if (a.dim > 3) throw std::invalid_argument("tv_histogram: dim > 3 unsupported");
  const int d = a.dim;
  if (bins_per_dim == 0) {
    const double m = double(std::min(a.size(), b.size()));
    bins_per_dim = int(std::clamp(std::ceil(std::cbrt(m)), 8.0, 256.0));
  }
  if (bins_per_dim < 1) throw std::invalid_argument("tv_histogram: bins_per_dim must be >= 1");

  Eigen::VectorXd lo(d), hi(d);
  for (int j = 0; j < d; ++j) {
    lo[j] = std::min(a.samples.col(j).minCoeff(), b.samples.col(j).minCoeff());
    hi[j] = std::max(a.samples.col(j).maxCoeff(), b.samples.col(j).maxCoeff());
    double width = hi[j] - lo[j];
    if (width <= 0.0) width = 1.0;
    lo[j] -= 0.025 * width;
    hi[j] += 0.025 * width;
  }

  std::int64_t n_cells = 1;
  for (int j = 0; j < d; ++j) n_cells *= bins_per_dim;
  std::vector<double> pa(static_cast<std::size_t>(n_cells), 0.0), pb(static_cast<std::size_t>(n_cells), 0.0);

  auto cell_of = [&](const Eigen::MatrixXd& s, std::int64_t i) {
    std::int64_t cell = 0;
    for (int j = 0; j < d; ++j) {
      const double frac = (s(i, j) - lo[j]) / (hi[j] - lo[j]);
      int k = int(frac * bins_per_dim);
      k = std::clamp(k, 0, bins_per_dim - 1);
      cell = cell * bins_per_dim + k;
    }
    return cell;
  };
  for (std::int64_t i = 0; i < a.size(); ++i) pa[std::size_t(cell_of(a.samples, i))] += 1.0;
  for (std::int64_t i = 0; i < b.size(); ++i) pb[std::size_t(cell_of(b.samples, i))] += 1.0;

  std::vector<double> gaps(static_cast<std::size_t>(n_cells));
  const double inv_a = 1.0 / double(a.size()), inv_b = 1.0 / double(b.size());
  for (std::size_t c = 0; c < gaps.size(); ++c) gaps[c] = std::abs(pa[c] * inv_a - pb[c] * inv_b);
  return 0.5 * pairwise_sum(gaps);
}

struct MomentEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  bool saturated = false;
};

/// Sample mean of exp(p * s(|x|)) over the ensemble, with standard error and
/// an overflow flag (saturated evaluations poison the mean by design).
inline MomentEstimate lyapunov_moment(const PathEnsemble& a, double p) {
  if (p < 1.0) throw std::invalid_argument("lyapunov_moment: p must be >= 1");
  const std::int64_t m = a.size();
  if (m < 2) throw std::invalid_argument("lyapunov_moment: need M >= 2");
  std::vector<double> vals(static_cast<std::size_t>(m));
  MomentEstimate out;
  for (std::int64_t i = 0; i < m; ++i) {
    const auto lv = lyapunov_V(a.samples.row(i).transpose(), p);
    out.saturated = out.saturated || lv.saturated;
    vals[std::size_t(i)] = lv.value;
  }
  out.value = pairwise_mean(vals);
  std::vector<double> sq(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double c = vals[i] - out.value;
    sq[i] = c * c;
  }
  out.standard_error = std::sqrt(pairwise_sum(sq) / double(m - 1) / double(m));
  return out;
}

/// Convenience constructor for 1D ensembles from a flat sample vector.
inline PathEnsemble make_ensemble_1d(std::vector<double> xs, double checkpoint_time = 0.0,
                                     EnsembleMeta meta = {}) {
  PathEnsemble e;
  e.dim = 1;
  e.samples.resize(std::int64_t(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) e.samples(std::int64_t(i), 0) = xs[i];
  e.checkpoint_time = checkpoint_time;
  e.meta = std::move(meta);
  return e;
}

}  // namespace tsde
