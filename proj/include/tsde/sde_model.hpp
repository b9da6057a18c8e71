#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tsde/errors.hpp"
#include "tsde/linalg.hpp"
#include "tsde/rng.hpp"

namespace tsde {

// SDE problems dX = b(X) dt + sigma(X) dB. Drift may grow superlinearly; the
// declared constants witness the dissipativity / growth / Lipschitz structure
// the integrator's guarantees rest on, and the probe functions below spot-check
// them on compact sets.

struct DeclaredConstants {
  double r = 0.0;       // drift growth order
  double L1 = 1.0;      // drift structure constant
  double lambda = 1.0;  // dissipativity strength
  double L2 = 1.0;      // diffusion bound (norm, inverse, first two derivatives)
};

/// Drift b(x) = x - x^3 in a well pair, diffusion 2 + sin x.
struct DoubleWell1D {
  static constexpr int static_dim = 1;
  static constexpr bool additive = false;
  using vec_t = Eigen::Matrix<double, 1, 1>;
  using mat_t = Eigen::Matrix<double, 1, 1>;
  static constexpr DeclaredConstants constants{2.0, 1.5, 0.5, 3.0};
  void drift(const vec_t& x, vec_t& out) const { out[0] = x[0] - x[0] * x[0] * x[0]; }
  void drift_jacobian(const vec_t& x, mat_t& out) const { out(0, 0) = 1.0 - 3.0 * x[0] * x[0]; }
  void diffusion(const vec_t& x, mat_t& out) const { out(0, 0) = 2.0 + std::sin(x[0]); }
};

/// Same drift, unit additive noise.
struct DoubleWell1DAdditive {
  static constexpr int static_dim = 1;
  static constexpr bool additive = true;
  using vec_t = Eigen::Matrix<double, 1, 1>;
  using mat_t = Eigen::Matrix<double, 1, 1>;
  static constexpr DeclaredConstants constants{2.0, 1.5, 0.5, 1.0};
  void drift(const vec_t& x, vec_t& out) const { out[0] = x[0] - x[0] * x[0] * x[0]; }
  void drift_jacobian(const vec_t& x, mat_t& out) const { out(0, 0) = 1.0 - 3.0 * x[0] * x[0]; }
  void diffusion(const vec_t&, mat_t& out) const { out(0, 0) = 1.0; }
};

/// Ornstein-Uhlenbeck: the linear sanity case with closed-form law.
struct Ou1D {
  static constexpr int static_dim = 1;
  static constexpr bool additive = true;
  using vec_t = Eigen::Matrix<double, 1, 1>;
  using mat_t = Eigen::Matrix<double, 1, 1>;
  static constexpr DeclaredConstants constants{0.0, 1.0, 1.0, 1.0};
  void drift(const vec_t& x, vec_t& out) const { out[0] = -x[0]; }
  void drift_jacobian(const vec_t&, mat_t& out) const { out(0, 0) = -1.0; }
  void diffusion(const vec_t&, mat_t& out) const { out(0, 0) = 1.0; }
};

/// Componentwise well pair in three dimensions with mildly state-dependent
/// diagonal noise.
struct DoubleWell3D {
  static constexpr int static_dim = 3;
  static constexpr bool additive = false;
  using vec_t = Eigen::Matrix<double, 3, 1>;
  using mat_t = Eigen::Matrix<double, 3, 3>;
  static constexpr DeclaredConstants constants{2.0, 1.5, 0.5, 1.25};
  void drift(const vec_t& x, vec_t& out) const { out = x * (1.0 - x.squaredNorm()); }
  void drift_jacobian(const vec_t& x, mat_t& out) const {
    out = -2.0 * x * x.transpose();
    out.diagonal().array() += 1.0 - x.squaredNorm();
  }
  void diffusion(const vec_t& x, mat_t& out) const {
    out.setZero();
    for (int i = 0; i < 3; ++i) out(i, i) = 1.0 + 0.2 * std::sin(x[i]);
  }
};

/// Code-defined problem with runtime dimension; used for tests and bespoke
/// studies, never on the hot path of the built-in experiments.
struct CustomProblem {
  int dim = 1;
  bool additive = false;
  DeclaredConstants constants;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift_fn;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> drift_jacobian_fn;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> diffusion_fn;
};

using AnyProblem =
    std::variant<DoubleWell1D, DoubleWell1DAdditive, Ou1D, DoubleWell3D, CustomProblem>;

/// Built-in problems addressable by string id.
inline AnyProblem make_problem(const std::string& id) {
  if (id == "double-well-1d") return DoubleWell1D{};
  if (id == "double-well-1d-additive") return DoubleWell1DAdditive{};
  if (id == "ou-1d") return Ou1D{};
  if (id == "double-well-3d") return DoubleWell3D{};
  throw config_error("unknown problem id: " + id +
                     " (known: double-well-1d, double-well-1d-additive, ou-1d, double-well-3d)");
}

template <class P>
concept StaticProblem = requires { P::static_dim; };

inline int problem_dim(const AnyProblem& p) {
  return std::visit(
      []<class P>(const P& v) -> int {
        if constexpr (StaticProblem<P>)
          return P::static_dim;
        else
          return v.dim;
      },
      p);
}

inline bool problem_additive(const AnyProblem& p) {
  return std::visit(
      []<class P>(const P& v) -> bool {
        if constexpr (StaticProblem<P>)
          return P::additive;
        else
          return v.additive;
      },
      p);
}

inline DeclaredConstants problem_constants(const AnyProblem& p) {
  return std::visit([](const auto& v) { return v.constants; }, p);
}

// Dynamic-size evaluation, for probes and other cold paths.
inline Eigen::VectorXd eval_drift(const AnyProblem& p, const Eigen::VectorXd& x) {
  return std::visit(
      [&]<class P>(const P& v) -> Eigen::VectorXd {
        if constexpr (StaticProblem<P>) {
          typename P::vec_t out;
          v.drift(typename P::vec_t(x), out);
          return out;
        } else {
          return v.drift_fn(x);
        }
      },
      p);
}

inline Eigen::MatrixXd eval_drift_jacobian(const AnyProblem& p, const Eigen::VectorXd& x) {
  return std::visit(
      [&]<class P>(const P& v) -> Eigen::MatrixXd {
        if constexpr (StaticProblem<P>) {
          typename P::mat_t out;
          v.drift_jacobian(typename P::vec_t(x), out);
          return out;
        } else {
          return v.drift_jacobian_fn(x);
        }
      },
      p);
}

inline Eigen::MatrixXd eval_diffusion(const AnyProblem& p, const Eigen::VectorXd& x) {
  return std::visit(
      [&]<class P>(const P& v) -> Eigen::MatrixXd {
        if constexpr (StaticProblem<P>) {
          typename P::mat_t out;
          v.diffusion(typename P::vec_t(x), out);
          return out;
        } else {
          return v.diffusion_fn(x);
        }
      },
      p);
}

/// Spectral norm of a drift Jacobian; the taming denominator feeds on this.
inline double jacobian_opnorm(const Eigen::Ref<const Eigen::MatrixXd>& J) {
  if (!J.allFinite()) throw std::invalid_argument("jacobian_opnorm: non-finite entries");
  return operator_norm(J);
}

// ---------------------------------------------------------------------------
// Lyapunov function: exp(p * s(|x|)) where s equals |x| outside the unit ball
// and bridges through a quartic inside so the whole function is C^2. The
// bridge is the unique even quartic matching value, slope and curvature at 1.

inline double lyapunov_bridge(double rho) {
  if (rho >= 1.0) return rho;
  const double r2 = rho * rho;
  return 0.375 + 0.75 * r2 - 0.125 * r2 * r2;
}

struct LyapunovValue {
  double value = 0.0;
  bool saturated = false;  // exponent exceeded the representable range
};

inline LyapunovValue lyapunov_V(const Eigen::Ref<const Eigen::VectorXd>& x, double p) {
  if (!(p > 0.0)) throw std::invalid_argument("lyapunov_V: p must be positive");
  const double expo = p * lyapunov_bridge(x.norm());
  // log(DBL_MAX) ~ 709.78
  if (expo > 709.0) return {std::numeric_limits<double>::infinity(), true};
  return {std::exp(expo), false};
}

// ---------------------------------------------------------------------------
// Sampled assumption checks. Probes are deterministic: an even radial grid
// plus counter-based quasi-random points in the annulus. worst_violation is
// max over probes of LHS - RHS of the checked inequality; <= 0 means pass.

enum class Condition {
  drift_dissipativity,  // <x,b(x)> <= L1 - lambda |x|^{r+2}
  drift_growth,         // |b(x)| <= L1 (1 + |x| ||grad b(x)||)
  drift_poly_lipschitz, // |b(x)-b(y)| <= L1 (1 + |x|^r + |y|^r) |x-y|
  diffusion_bounds,     // ||sigma|| v ||sigma^{-1}|| v ||grad sigma|| v ||grad^2 sigma|| <= L2
};

inline const char* condition_name(Condition c) {
  switch (c) {
    case Condition::drift_dissipativity: return "drift_dissipativity";
    case Condition::drift_growth: return "drift_growth";
    case Condition::drift_poly_lipschitz: return "drift_poly_lipschitz";
    case Condition::diffusion_bounds: return "diffusion_bounds";
  }
  return "unknown";
}

struct AssumptionReport {
  Condition checked_condition{};
  std::int64_t n_probes = 0;
  double worst_violation = -std::numeric_limits<double>::infinity();
  std::vector<Eigen::VectorXd> worst_points;  // one point, or the pair (x, y)
  bool pass() const { return worst_violation <= 0.0; }
};

struct ProbeSpec {
  double radius_min = 0.0;
  double radius_max = 10.0;
  std::int64_t count = 400;
  std::uint64_t seed = 1;
};

namespace detail {

/// Deterministic probe points: half on radial rays through fixed directions,
/// half quasi-random inside the annulus.
inline std::vector<Eigen::VectorXd> probe_points(int dim, const ProbeSpec& spec,
                                                 std::uint32_t subchannel) {
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(std::size_t(spec.count));
  const std::int64_t grid_n = spec.count / 2;
  const std::uint32_t tag = stream_tag(Stream::probe_mc, subchannel);

  std::vector<Eigen::VectorXd> dirs;
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e[i] = 1.0;
    dirs.push_back(e);
    dirs.push_back(-e);
  }
  dirs.push_back(Eigen::VectorXd::Constant(dim, 1.0 / std::sqrt(double(dim))));

  for (std::int64_t i = 0; i < grid_n; ++i) {
    const double frac = grid_n == 1 ? 1.0 : double(i) / double(grid_n - 1);
    const double radius = spec.radius_min + frac * (spec.radius_max - spec.radius_min);
    pts.push_back(radius * dirs[std::size_t(i) % dirs.size()]);
  }
  for (std::int64_t i = grid_n; i < spec.count; ++i) {
    Eigen::VectorXd z(dim);
    normal_fill(spec.seed, tag, std::uint32_t(i), 0, z.data(), dim);
    const double u = uniform_at(spec.seed, tag, std::uint32_t(i), 1, 0);
    const double radius = spec.radius_min + u * (spec.radius_max - spec.radius_min);
    const double zn = z.norm();
    pts.push_back(zn > 0 ? Eigen::VectorXd(radius / zn * z)
                         : Eigen::VectorXd::Zero(dim));
  }
  return pts;
}

inline void record_violation(AssumptionReport& rep, double violation,
                             std::vector<Eigen::VectorXd> pts) {
  if (violation > rep.worst_violation) {
    rep.worst_violation = violation;
    rep.worst_points = std::move(pts);
  }
}

}  // namespace detail

/// Probes the three structural drift inequalities; one report each, in the
/// order dissipativity, growth, polynomial Lipschitz.
inline std::array<AssumptionReport, 3> check_drift_conditions(const AnyProblem& problem,
                                                              const ProbeSpec& spec) {
  const int dim = problem_dim(problem);
  const DeclaredConstants c = problem_constants(problem);
  const auto pts = detail::probe_points(dim, spec, 1);

  std::array<AssumptionReport, 3> out;
  out[0].checked_condition = Condition::drift_dissipativity;
  out[1].checked_condition = Condition::drift_growth;
  out[2].checked_condition = Condition::drift_poly_lipschitz;
  for (auto& r : out) r.n_probes = std::int64_t(pts.size());

  for (const auto& x : pts) {
    const Eigen::VectorXd b = eval_drift(problem, x);
    const double xn = x.norm();
    detail::record_violation(out[0], x.dot(b) - (c.L1 - c.lambda * std::pow(xn, c.r + 2.0)), {x});
    const double jn = jacobian_opnorm(eval_drift_jacobian(problem, x));
    detail::record_violation(out[1], b.norm() - c.L1 * (1.0 + xn * jn), {x});
  }
  for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
    const Eigen::VectorXd& x = pts[i];
    const Eigen::VectorXd& y = pts[i + 1];
    const double lhs = (eval_drift(problem, x) - eval_drift(problem, y)).norm();
    const double rhs = c.L1 * (1.0 + std::pow(x.norm(), c.r) + std::pow(y.norm(), c.r)) *
                       (x - y).norm();
    detail::record_violation(out[2], lhs - rhs, {x, y});
  }
  out[2].n_probes = std::int64_t(pts.size() / 2);
  return out;
}

/// Probes diffusion boundedness: norm, inverse norm, and first/second
/// derivatives (central finite differences, step 1e-4 * (1 + |x|)) against L2.
inline AssumptionReport check_diffusion_conditions(const AnyProblem& problem,
                                                   const ProbeSpec& spec) {
  const int dim = problem_dim(problem);
  const DeclaredConstants c = problem_constants(problem);
  const auto pts = detail::probe_points(dim, spec, 2);

  AssumptionReport rep;
  rep.checked_condition = Condition::diffusion_bounds;
  rep.n_probes = std::int64_t(pts.size());

  std::vector<Eigen::VectorXd> dirs;
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e[i] = 1.0;
    dirs.push_back(e);
  }
  dirs.push_back(Eigen::VectorXd::Constant(dim, 1.0 / std::sqrt(double(dim))));

  for (const auto& x : pts) {
    const Eigen::MatrixXd s = eval_diffusion(problem, x);
    detail::record_violation(rep, operator_norm(s) - c.L2, {x});
    try {
      detail::record_violation(rep, operator_norm(small_inverse(s)) - c.L2, {x});
    } catch (const std::runtime_error&) {
      detail::record_violation(rep, std::numeric_limits<double>::infinity(), {x});
      continue;
    }
    const double h = 1e-4 * (1.0 + x.norm());
    for (const auto& u : dirs) {
      const Eigen::MatrixXd sp = eval_diffusion(problem, x + h * u);
      const Eigen::MatrixXd sm = eval_diffusion(problem, x - h * u);
      detail::record_violation(rep, operator_norm((sp - sm) / (2.0 * h)) - c.L2, {x});
      detail::record_violation(rep, operator_norm((sp - 2.0 * s + sm) / (h * h)) - c.L2, {x});
    }
  }
  return rep;
}

}  // namespace tsde
