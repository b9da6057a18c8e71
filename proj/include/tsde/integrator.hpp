#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "tsde/errors.hpp"
#include "tsde/linalg.hpp"
#include "tsde/rng.hpp"
#include "tsde/sde_model.hpp"
#include "tsde/step_schedule.hpp"

namespace tsde {

// The tamed explicit update
//   Y' = Y + eta * b(Y) / (1 + eta^alpha * ||grad b(Y)||) + sigma(Y) * dB
// iterated on decreasing or constant grids. Hot loops are templated on the
// problem type so built-in models run allocation-free with fixed-size states;
// the AnyProblem entry points dispatch once per path, never per step.

/// 1 / (1 + eta^alpha * opnorm), always in (0, 1].
inline double taming_factor(double eta, double alpha, double opnorm) {
  assert(eta > 0.0 && alpha > 0.0 && alpha < 0.5);
  return 1.0 / (1.0 + std::pow(eta, alpha) * opnorm);
}

struct PathState {
  Eigen::VectorXd position;
  double time = 0.0;
  std::int64_t step_index = 0;
};

struct NoiseIncrement {
  Eigen::VectorXd dB;  // N(0, eta I) coordinates
  double eta = 0.0;
};

struct PathPoint {
  std::int64_t step_index = 0;
  Eigen::VectorXd position;
};

struct TangentState {
  PathState base;
  Eigen::VectorXd tangent;
  double integral_acc = 0.0;
};

/// Per-step arrays shared read-only by every path of an ensemble: step sizes,
/// their alpha powers, and compensated grid times (times[k] = t_k).
struct SchedulePrefix {
  std::vector<double> eta;
  std::vector<double> eta_alpha;
  std::vector<double> time;
};

inline SchedulePrefix precompute_prefix(const StepSchedule& schedule, double alpha,
                                        std::int64_t n_steps) {
  SchedulePrefix p;
  p.eta.resize(std::size_t(n_steps));
  p.eta_alpha.resize(std::size_t(n_steps));
  p.time.resize(std::size_t(n_steps) + 1);
  CompensatedSum t;
  p.time[0] = 0.0;
  for (std::int64_t k = 1; k <= n_steps; ++k) {
    const double e = schedule.eta(k);
    p.eta[std::size_t(k - 1)] = e;
    p.eta_alpha[std::size_t(k - 1)] = std::pow(e, alpha);
    t.add(e);
    p.time[std::size_t(k)] = t.value();
  }
  return p;
}

namespace detail {

/// Spectral norm specialized for the state sizes the kernels see. Semantics
/// match operator_norm (same start vector, tolerance, iteration cap).
template <class Mat>
double opnorm_small(const Mat& J) {
  constexpr int R = Mat::RowsAtCompileTime;
  if constexpr (R == 1) {
    return std::abs(J(0, 0));
  } else if constexpr (R == Eigen::Dynamic) {
    return operator_norm(J);
  } else {
    using Sq = Eigen::Matrix<double, R, R>;
    using Vec = Eigen::Matrix<double, R, 1>;
    const Sq m = J.transpose() * J;
    Vec v = Vec::Ones() / std::sqrt(double(R));
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
      const Vec w = m * v;
      const double n = w.norm();
      if (n == 0.0) return 0.0;
      v = w / n;
      if (std::abs(n - lambda) <= 1e-12 * std::max(1.0, n)) {
        lambda = n;
        break;
      }
      lambda = n;
    }
    return std::sqrt(lambda);
  }
}

/// Wraps the std::function problem so all kernels see one model shape.
struct DynamicModel {
  const CustomProblem* p;
  using vec_t = Eigen::VectorXd;
  using mat_t = Eigen::MatrixXd;
  static constexpr bool additive = false;
  void drift(const vec_t& x, vec_t& out) const { out = p->drift_fn(x); }
  void drift_jacobian(const vec_t& x, mat_t& out) const { out = p->drift_jacobian_fn(x); }
  void diffusion(const vec_t& x, mat_t& out) const { out = p->diffusion_fn(x); }
};

template <class F>
decltype(auto) with_model(const AnyProblem& p, F&& f) {
  return std::visit(
      [&]<class P>(const P& v) -> decltype(auto) {
        if constexpr (std::same_as<P, CustomProblem>)
          return f(DynamicModel{&v});
        else
          return f(v);
      },
      p);
}

template <class Vec>
bool finite_state(const Vec& y) {
  return y.allFinite();
}

[[noreturn]] inline void throw_divergence(std::int64_t step, double time,
                                          const Eigen::VectorXd& pos) {
  throw divergence_error(step, time, pos);
}

/// One tamed update in place. sig must hold sigma(y) on entry when the model
/// is additive (it is then never recomputed).
template <class Model>
inline void tamed_update(const Model& m, typename Model::vec_t& y, typename Model::vec_t& b,
                         typename Model::mat_t& J, typename Model::mat_t& sig,
                         typename Model::vec_t& dB, double eta, double eta_alpha_pow) {
  m.drift(y, b);
  m.drift_jacobian(y, J);
  const double factor = 1.0 / (1.0 + eta_alpha_pow * opnorm_small<typename Model::mat_t>(J));
#ifndef NDEBUG
  {
    // Taming boundedness: the drift displacement never exceeds eta*|b|, and
    // for steep gradients it is cut to eta^{1-alpha}*|b|/||J|| (here written
    // via eta_alpha_pow = eta^alpha to avoid recomputing the power).
    const double disp = eta * factor * b.norm();
    const double jn = opnorm_small<typename Model::mat_t>(J);
    assert(disp <= eta * b.norm() * (1.0 + 1e-12) + 1e-300);
    if (jn >= 1.0)
      assert(disp <= eta * b.norm() / (eta_alpha_pow * jn) * (1.0 + 1e-12) + 1e-300);
  }
#endif
  if constexpr (!Model::additive) m.diffusion(y, sig);
  y += (eta * factor) * b;
  y += sig * dB;
}

/// Variable-step path. Emits emit(ordinal, step_index, y) at each checkpoint
/// index (sorted, may include 0). Throws divergence_error on non-finite state.
template <class Model, class Emit>
void run_schedule_path(const Model& m, const SchedulePrefix& pre,
                       const typename Model::vec_t& x0, std::span<const std::int64_t> checkpoints,
                       std::uint64_t seed, std::uint32_t tag, std::uint32_t path, Emit&& emit) {
  using vec_t = typename Model::vec_t;
  using mat_t = typename Model::mat_t;
  vec_t y = x0;
  const int d = int(y.size());
  vec_t b = y, z = y, dB = y;
  mat_t J, sig;
  if constexpr (Model::mat_t::RowsAtCompileTime == Eigen::Dynamic) {
    J.resize(d, d);
    sig.resize(d, d);
  }
  if constexpr (Model::additive) m.diffusion(y, sig);

  std::size_t ci = 0;
  std::size_t ordinal = 0;
  while (ci < checkpoints.size() && checkpoints[ci] == 0) {
    emit(ordinal++, std::int64_t{0}, y);
    ++ci;
  }
  const std::int64_t n_steps = std::int64_t(pre.eta.size());
  for (std::int64_t k = 1; k <= n_steps; ++k) {
    const double eta = pre.eta[std::size_t(k - 1)];
    normal_fill(seed, tag, path, std::uint32_t(k), z.data(), d);
    dB = std::sqrt(eta) * z;
    tamed_update(m, y, b, J, sig, dB, eta, pre.eta_alpha[std::size_t(k - 1)]);
    if (!finite_state(y)) throw_divergence(k, pre.time[std::size_t(k)], Eigen::VectorXd(y));
    while (ci < checkpoints.size() && checkpoints[ci] == k) {
      emit(ordinal++, k, y);
      ++ci;
    }
  }
}

/// Constant-step run to exactly t_final: floor(t_final/eta) full steps plus a
/// shortened final step. Returns the endpoint.
template <class Model>
typename Model::vec_t run_constant_path(const Model& m, double t_final, double eta, double alpha,
                                        const typename Model::vec_t& x0, std::uint64_t seed,
                                        std::uint32_t tag, std::uint32_t path) {
  using vec_t = typename Model::vec_t;
  using mat_t = typename Model::mat_t;
  vec_t y = x0;
  const int d = int(y.size());
  vec_t b = y, z = y, dB = y;
  mat_t J, sig;
  if constexpr (Model::mat_t::RowsAtCompileTime == Eigen::Dynamic) {
    J.resize(d, d);
    sig.resize(d, d);
  }
  if constexpr (Model::additive) m.diffusion(y, sig);

  const std::int64_t n_full = std::int64_t(std::floor(t_final / eta));
  const double last = t_final - double(n_full) * eta;
  const double eta_a = std::pow(eta, alpha);
  const double sqrt_eta = std::sqrt(eta);
  CompensatedSum t;
  for (std::int64_t k = 1; k <= n_full; ++k) {
    normal_fill(seed, tag, path, std::uint32_t(k), z.data(), d);
    dB = sqrt_eta * z;
    tamed_update(m, y, b, J, sig, dB, eta, eta_a);
    t.add(eta);
    if (!finite_state(y)) throw_divergence(k, t.value(), Eigen::VectorXd(y));
  }
  if (last > t_final * 1e-14) {
    normal_fill(seed, tag, path, std::uint32_t(n_full + 1), z.data(), d);
    dB = std::sqrt(last) * z;
    tamed_update(m, y, b, J, sig, dB, last, std::pow(last, alpha));
    if (!finite_state(y)) throw_divergence(n_full + 1, t_final, Eigen::VectorXd(y));
  }
  return y;
}

/// Plain (untamed) Euler endpoint at constant step; the discretization used
/// by the gradient-identity machinery, where steps are uniformly fine.
template <class Model>
typename Model::vec_t run_plain_path(const Model& m, double t_final, double eta,
                                     const typename Model::vec_t& x0, std::uint64_t seed,
                                     std::uint32_t tag, std::uint32_t path) {
  using vec_t = typename Model::vec_t;
  using mat_t = typename Model::mat_t;
  vec_t y = x0;
  const int d = int(y.size());
  vec_t b = y, z = y, dB = y;
  mat_t sig;
  if constexpr (Model::mat_t::RowsAtCompileTime == Eigen::Dynamic) sig.resize(d, d);
  if constexpr (Model::additive) m.diffusion(y, sig);

  const std::int64_t n_full = std::int64_t(std::floor(t_final / eta));
  const double last = t_final - double(n_full) * eta;
  CompensatedSum t;
  for (std::int64_t k = 1; k <= n_full + 1; ++k) {
    const double h = k <= n_full ? eta : last;
    if (h <= t_final * 1e-14) break;
    normal_fill(seed, tag, path, std::uint32_t(k), z.data(), d);
    dB = std::sqrt(h) * z;
    m.drift(y, b);
    if constexpr (!Model::additive) m.diffusion(y, sig);
    y += h * b + sig * dB;
    t.add(h);
    if (!finite_state(y)) throw_divergence(k, t.value(), Eigen::VectorXd(y));
  }
  return y;
}

}  // namespace detail

/// One tamed update from an explicit state and noise increment.
inline PathState tamed_step(const AnyProblem& problem, const PathState& state, double eta,
                            double alpha, const NoiseIncrement& noise) {
  if (noise.eta != eta) throw std::invalid_argument("tamed_step: noise.eta mismatch");
  if (!state.position.allFinite()) throw std::invalid_argument("tamed_step: non-finite state");
  const Eigen::VectorXd b = eval_drift(problem, state.position);
  const double opn = jacobian_opnorm(eval_drift_jacobian(problem, state.position));
  const double factor = taming_factor(eta, alpha, opn);
  PathState out;
  out.position = state.position + (eta * factor) * b +
                 eval_diffusion(problem, state.position) * noise.dB;
  out.time = state.time + eta;
  out.step_index = state.step_index + 1;
  if (!out.position.allFinite())
    throw divergence_error(out.step_index, out.time, out.position);
  return out;
}

/// Variable-step path over a schedule, emitting positions at the requested
/// step indices. Bit-identical for fixed (master_seed, path_index) regardless
/// of threading.
inline std::vector<PathPoint> simulate_path(const AnyProblem& problem,
                                            const StepSchedule& schedule, double alpha,
                                            const Eigen::VectorXd& x0, std::int64_t n_steps,
                                            std::vector<std::int64_t> checkpoints,
                                            std::uint32_t path_index, std::uint64_t master_seed,
                                            std::uint32_t tag = stream_tag(Stream::variable_step)) {
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end()))
    throw std::invalid_argument("simulate_path: checkpoints must be sorted");
  if (!checkpoints.empty() && checkpoints.back() > n_steps)
    throw std::invalid_argument("simulate_path: checkpoint beyond n_steps");
  if (checkpoints.empty()) checkpoints.push_back(n_steps);

  const SchedulePrefix pre = precompute_prefix(schedule, alpha, n_steps);
  std::vector<PathPoint> out(checkpoints.size());
  detail::with_model(problem, [&](const auto& m) {
    using vec_t = typename std::remove_cvref_t<decltype(m)>::vec_t;
    const vec_t start(x0);
    detail::run_schedule_path(m, pre, start, checkpoints, master_seed, tag, path_index,
                              [&](std::size_t ord, std::int64_t step, const auto& y) {
                                out[ord] = PathPoint{step, Eigen::VectorXd(y)};
                              });
  });
  return out;
}

/// Constant-step tamed run landing exactly on t_final; the fine-grid stand-in
/// for the exact law. Uses its own noise stream.
inline Eigen::VectorXd simulate_reference(const AnyProblem& problem, double t_final,
                                          double eta_ref, double alpha, const Eigen::VectorXd& x0,
                                          std::uint32_t path_index, std::uint64_t master_seed,
                                          std::uint32_t tag = stream_tag(Stream::reference)) {
  if (!(eta_ref > 0.0)) throw std::invalid_argument("simulate_reference: eta_ref must be > 0");
  if (t_final <= 0.0) return x0;
  return detail::with_model(problem, [&](const auto& m) -> Eigen::VectorXd {
    using vec_t = typename std::remove_cvref_t<decltype(m)>::vec_t;
    return Eigen::VectorXd(detail::run_constant_path(m, t_final, eta_ref, alpha, vec_t(x0),
                                                     master_seed, tag, path_index));
  });
}

/// Coupled pair over one coarse step of size eta: a fine tamed chain at
/// resolution eta/n_sub, and the frozen-coefficient endpoint driven by the
/// same total Brownian increment (exact for the frozen dynamics).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> coupled_one_step(
    const AnyProblem& problem, const Eigen::VectorXd& x, double eta, double alpha, int n_sub,
    std::uint32_t path_index, std::uint64_t master_seed,
    std::uint32_t tag = stream_tag(Stream::one_step)) {
  if (n_sub < 1) throw std::invalid_argument("coupled_one_step: n_sub must be >= 1");
  return detail::with_model(problem, [&](const auto& m) {
    using M = std::remove_cvref_t<decltype(m)>;
    using vec_t = typename M::vec_t;
    using mat_t = typename M::mat_t;
    const int d = int(x.size());
    vec_t y(x), b(y), z(y), dB(y), total(y);
    mat_t J, sig;
    if constexpr (M::mat_t::RowsAtCompileTime == Eigen::Dynamic) {
      J.resize(d, d);
      sig.resize(d, d);
    }
    if constexpr (M::additive) m.diffusion(y, sig);

    const double h = eta / n_sub;
    const double h_a = std::pow(h, alpha);
    const double sqrt_h = std::sqrt(h);
    total.setZero();
    for (int k = 1; k <= n_sub; ++k) {
      normal_fill(master_seed, tag, path_index, std::uint32_t(k), z.data(), d);
      dB = sqrt_h * z;
      total += dB;
      detail::tamed_update(m, y, b, J, sig, dB, h, h_a);
      if (!detail::finite_state(y))
        detail::throw_divergence(k, h * k, Eigen::VectorXd(y));
    }

    vec_t x_start(x);
    m.drift(x_start, b);
    m.drift_jacobian(x_start, J);
    const double factor =
        1.0 / (1.0 + std::pow(eta, alpha) * detail::opnorm_small<mat_t>(J));
    if constexpr (!M::additive) m.diffusion(x_start, sig);
    vec_t one = x_start;
    one += (eta * factor) * b;
    one += sig * total;
    return std::make_pair(Eigen::VectorXd(y), Eigen::VectorXd(one));
  });
}

/// First-variation pair (X, R) by plain Euler on a fine constant grid,
/// accumulating the stochastic integral <sigma(X)^{-1} R, dB> used by the
/// gradient identity. R responds to the state through the drift Jacobian and
/// a finite-difference directional derivative of sigma.
inline TangentState simulate_tangent(const AnyProblem& problem, double t_final, double eta_ref,
                                     const Eigen::VectorXd& x0, const Eigen::VectorXd& v,
                                     std::uint32_t path_index, std::uint64_t master_seed,
                                     std::uint32_t tag = stream_tag(Stream::tangent)) {
  if (!(v.norm() > 0.0)) throw std::invalid_argument("simulate_tangent: v must be nonzero");
  if (!(eta_ref > 0.0)) throw std::invalid_argument("simulate_tangent: eta_ref must be > 0");
  const int d = int(x0.size());
  const bool additive = problem_additive(problem);

  Eigen::VectorXd x = x0, r = v, z(d), dB(d);
  CompensatedSum t_acc, integral;
  const std::int64_t n_full = std::int64_t(std::floor(t_final / eta_ref));
  const double last = t_final - double(n_full) * eta_ref;
  std::int64_t steps_done = 0;
  for (std::int64_t k = 1; k <= n_full + 1; ++k) {
    const double h = k <= n_full ? eta_ref : last;
    if (h <= t_final * 1e-14) break;
    normal_fill(master_seed, tag, path_index, std::uint32_t(k), z.data(), d);
    dB = std::sqrt(h) * z;

    const Eigen::MatrixXd sig = eval_diffusion(problem, x);
    Eigen::MatrixXd sig_inv;
    try {
      sig_inv = small_inverse(sig);
    } catch (const std::runtime_error&) {
      throw std::runtime_error("simulate_tangent: singular diffusion at t=" +
                               std::to_string(t_acc.value()));
    }
    integral.add((sig_inv * r).dot(dB));

    const Eigen::VectorXd b = eval_drift(problem, x);
    const Eigen::MatrixXd J = eval_drift_jacobian(problem, x);
    Eigen::VectorXd r_next = r + h * (J * r);
    if (!additive) {
      const double rn = r.norm();
      if (rn > 0.0) {
        const double eps = 1e-6 * (1.0 + x.norm());
        const Eigen::VectorXd u = r / rn;
        const Eigen::MatrixXd dsig =
            (eval_diffusion(problem, x + eps * u) - eval_diffusion(problem, x - eps * u)) /
            (2.0 * eps) * rn;
        r_next += dsig * dB;
      }
    }
    x += h * b + sig * dB;
    r = r_next;
    t_acc.add(h);
    ++steps_done;
    if (!x.allFinite() || !r.allFinite())
      throw divergence_error(k, t_acc.value(), x);
  }

  TangentState out;
  out.base = PathState{x, t_acc.value(), steps_done};
  out.tangent = r;
  out.integral_acc = integral.value();
  return out;
}

/// Monte Carlo directional derivative of x -> E f(X_t^x) via the tangent
/// integral identity: average of (1/t) f(X_t) * integral_acc.
inline std::pair<double, double> bel_gradient(const AnyProblem& problem,
                                              const std::function<double(const Eigen::VectorXd&)>& f,
                                              double t, const Eigen::VectorXd& x0,
                                              const Eigen::VectorXd& v, std::int64_t M,
                                              double eta_ref, std::uint64_t master_seed,
                                              std::uint32_t tag = stream_tag(Stream::tangent)) {
  if (!(t > 0.0)) throw std::invalid_argument("bel_gradient: t must be > 0");
  if (M < 2) throw std::invalid_argument("bel_gradient: M must be >= 2");
  std::vector<double> samples(static_cast<std::size_t>(M));
  for (std::int64_t i = 0; i < M; ++i) {
    const TangentState ts =
        simulate_tangent(problem, t, eta_ref, x0, v, std::uint32_t(i), master_seed, tag);
    samples[std::size_t(i)] = f(ts.base.position) * ts.integral_acc / t;
  }
  const double mean = pairwise_mean(samples);
  std::vector<double> sq(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double c = samples[i] - mean;
    sq[i] = c * c;
  }
  const double var = pairwise_sum(sq) / double(M - 1);
  return {mean, std::sqrt(var / double(M))};
}

}  // namespace tsde
