// Copyright 2026 The gibbslearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file maxent.hpp
 * Empirical dual of the maximum-entropy program,
 *
 *     L(lambda) = log Z_beta(lambda) + beta * sum_l lambda_l e_hat_l,
 *
 * minimised over a norm ball by projected gradient descent. The gradient is
 * beta (e_hat - e(lambda)), exact up to one diagonalization per iterate.
 */

#ifndef GIBBSLEARN_MAXENT_HPP
#define GIBBSLEARN_MAXENT_HPP

#include "gibbslearn/common.hpp"
#include "gibbslearn/gibbs.hpp"
#include "gibbslearn/lattice.hpp"
#include "gibbslearn/measurement.hpp"
#include "gibbslearn/qbp.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace gibbslearn {

enum class StepRule { fixed, backtracking, newton };
enum class ConstraintKind { linf, l2, none };

struct Constraint {
  ConstraintKind kind = ConstraintKind::linf;
  double radius = 1.0;

  VectorXd project(const VectorXd& x) const {
    switch (kind) {
      case ConstraintKind::linf:
        return x.cwiseMax(-radius).cwiseMin(radius);
      case ConstraintKind::l2: {
        const double norm = x.norm();
        return norm > radius ? VectorXd(x * (radius / norm)) : x;
      }
      case ConstraintKind::none:
        return x;
    }
    return x;
  }
};

struct SolverConfig {
  StepRule step_rule = StepRule::newton;
  double fixed_step = 0.1;
  double armijo = 0.5;   // c
  double shrink = 0.5;   // rho
  double tol_grad = 1e-12;
  long max_iters = 100000;
  Constraint constraint;
  std::optional<VectorXd> init;
  bool record_trace = true;

  void validate() const {
    if (!(tol_grad > 0.0)) throw Error("tol_grad must be positive");
    if (max_iters < 1) throw Error("max_iters must be positive");
    if (constraint.kind != ConstraintKind::none && !(constraint.radius > 0.0))
      throw Error("constraint radius must be positive");
    if (step_rule == StepRule::fixed && !(fixed_step > 0.0)) throw Error("fixed step must be positive");
    if (step_rule != StepRule::fixed &&
        (!(armijo > 0.0 && armijo < 1.0) || !(shrink > 0.0 && shrink < 1.0)))
      throw Error("backtracking parameters must lie in (0, 1)");
  }
};

struct TraceRow {
  long iter = 0;
  double objective = 0.0;
  double grad_norm = 0.0;  // projected-gradient norm
  double step = 0.0;
};

struct SolverTrace {
  std::vector<TraceRow> rows;
  VectorXd mu_hat;
  bool converged = false;
  long iterations = 0;
  double final_grad_norm = 0.0;
  double wall_seconds = 0.0;
};

struct SolveResult {
  VectorXd mu_hat;
  SolverTrace trace;
};

namespace detail {

struct DualPoint {
  double value = 0.0;
  VectorXd gradient;
};

inline DualPoint evaluate_dual(const VectorXd& lambda, const VectorXd& e_hat, double beta,
                               const OperatorBasis& basis) {
  if (lambda.size() != basis.m() || e_hat.size() != basis.m())
    throw Error("dimension mismatch between lambda, estimates and basis");
  const GibbsEnsemble ens = thermal_state(basis, lambda, beta);
  DualPoint p;
  p.value = ens.log_z + beta * lambda.dot(e_hat);
  p.gradient = beta * (e_hat - marginals(basis, ens));
  return p;
}

}  // namespace detail

inline double objective(const VectorXd& lambda, const MarginalEstimates& est, double beta,
                        const OperatorBasis& basis) {
  if (lambda.size() != basis.m() || est.e_hat.size() != basis.m())
    throw Error("dimension mismatch between lambda, estimates and basis");
  return log_partition(basis, lambda, beta) + beta * lambda.dot(est.e_hat);
}

inline VectorXd gradient(const VectorXd& lambda, const MarginalEstimates& est, double beta,
                         const OperatorBasis& basis) {
  return detail::evaluate_dual(lambda, est.e_hat, beta, basis).gradient;
}

namespace detail {

/// Free coordinates for a projected-Newton step: those not pinned at a face
/// of the box with the gradient pushing outward.
inline std::vector<Eigen::Index> free_coordinates(const VectorXd& x, const VectorXd& g,
                                                  const Constraint& c, double slack) {
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (c.kind == ConstraintKind::linf) {
      const bool at_lower = x(i) <= -c.radius + slack && g(i) > 0.0;
      const bool at_upper = x(i) >= c.radius - slack && g(i) < 0.0;
      if (at_lower || at_upper) continue;
    }
    free.push_back(i);
  }
  return free;
}

/// -H_FF^{-1} g_F on free coordinates, -g elsewhere. A non-positive-definite
/// block is shifted until the Cholesky factorization succeeds.
inline VectorXd newton_direction(const OperatorBasis& basis, const VectorXd& x, const VectorXd& g,
                                 double beta, const Constraint& c, double slack) {
  VectorXd d = -g;
  const auto free = free_coordinates(x, g, c, slack);
  if (free.empty()) return d;
  const MatrixXd h = hessian_logZ(basis, x, beta).matrix;
  const auto k = static_cast<Eigen::Index>(free.size());
  MatrixXd hff(k, k);
  VectorXd gf(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    gf(a) = g(free[a]);
    for (Eigen::Index b = 0; b < k; ++b) hff(a, b) = h(free[a], free[b]);
  }
  double shift = 0.0;
  for (int attempt = 0; attempt < 60; ++attempt) {
    Eigen::LLT<MatrixXd> llt(hff + shift * MatrixXd::Identity(k, k));
    if (llt.info() == Eigen::Success) {
      const VectorXd step = llt.solve(-gf);
      for (Eigen::Index a = 0; a < k; ++a) d(free[a]) = step(a);
      return d;
    }
    shift = shift == 0.0 ? 1e-12 * std::max(1.0, hff.diagonal().cwiseAbs().maxCoeff()) : shift * 10.0;
  }
  return d;
}

}  // namespace detail

/// Projected descent on the dual. Converged when ||lambda - P(lambda - g)|| is
/// at most tol_grad.
///
/// Step rules:
///  - fixed: lambda <- P(lambda - eta g).
///  - backtracking: P(lambda - t g) with Armijo backtracking (c, rho); the
///    trial step grows by 1/rho after an immediately accepted step.
///  - newton: projected Newton. Newton direction on the free coordinates,
///    gradient direction on coordinates pinned at the box, unit initial step,
///    Armijo backtracking. Falls back to a gradient step when the projected
///    direction is not a descent direction.
///
/// A trial point x+ = P(x + t d) is accepted when the Armijo condition
/// L(x+) <= L(x) + c g(x).(x+ - x) holds. Near the optimum objective
/// differences reach rounding level, so a point whose objective is within
/// rounding of L(x) is also accepted when g(x+).(x+ - x) <= c g(x).(x+ - x)
/// (implies Armijo by convexity) or, for Newton, when it shrinks the projected
/// gradient.
inline SolveResult solve(const MarginalEstimates& est, double beta, const OperatorBasis& basis,
                         const SolverConfig& cfg = {}) {
  cfg.validate();
  if (est.e_hat.size() != basis.m()) throw Error("estimates do not match basis size");
  const auto start = std::chrono::steady_clock::now();

  VectorXd x = cfg.constraint.project(cfg.init.value_or(VectorXd::Zero(basis.m())));
  if (x.size() != basis.m()) throw Error("initial point does not match basis size");
  detail::DualPoint cur = detail::evaluate_dual(x, est.e_hat, beta, basis);

  auto projected_norm = [&](const VectorXd& point, const VectorXd& grad) {
    return (point - cfg.constraint.project(point - grad)).norm();
  };

  SolverTrace trace;
  double gradient_step = cfg.step_rule == StepRule::fixed ? cfg.fixed_step : 1.0;
  int consecutive_increases = 0;
  long iter = 0;
  double pg = projected_norm(x, cur.gradient);
  if (cfg.record_trace) trace.rows.push_back({0, cur.value, pg, 0.0});

  while (pg > cfg.tol_grad && iter < cfg.max_iters) {
    ++iter;
    VectorXd x_new;
    detail::DualPoint next;
    double taken = gradient_step;

    if (cfg.step_rule == StepRule::fixed) {
      x_new = cfg.constraint.project(x - gradient_step * cur.gradient);
      next = detail::evaluate_dual(x_new, est.e_hat, beta, basis);
      consecutive_increases = next.value > cur.value ? consecutive_increases + 1 : 0;
      if (consecutive_increases >= 10) throw Error("descent failure");
    } else {
      const bool newton = cfg.step_rule == StepRule::newton;
      VectorXd direction =
          newton ? detail::newton_direction(basis, x, cur.gradient, beta, cfg.constraint,
                                            std::min(1e-10, pg))
                 : VectorXd(-cur.gradient);
      if (newton && cur.gradient.dot(cfg.constraint.project(x + direction) - x) >= 0.0)
        direction = -cur.gradient;
      const double armijo_c = newton ? 1e-4 : cfg.armijo;
      double t = newton ? 1.0 : gradient_step;
      bool first_try = true;
      while (true) {
        x_new = cfg.constraint.project(x + t * direction);
        const VectorXd dx = x_new - x;
        next = detail::evaluate_dual(x_new, est.e_hat, beta, basis);
        if (dx.squaredNorm() == 0.0) break;
        const double slope = cur.gradient.dot(dx);
        const bool armijo = next.value <= cur.value + armijo_c * slope;
        // objective may only rise by rounding noise
        const bool level = next.value <= cur.value + 1e-13 * std::max(1.0, std::abs(cur.value));
        const bool curvature = next.gradient.dot(dx) <= armijo_c * slope;
        const bool shrinking = newton && projected_norm(x_new, next.gradient) < pg;
        if (armijo || (level && (curvature || shrinking))) break;
        t *= cfg.shrink;
        first_try = false;
        if (t < 1e-30) break;
      }
      if (t < 1e-30) {
        // no acceptable step left above rounding level
        --iter;
        break;
      }
      taken = t;
      if (!newton) gradient_step = first_try ? t / cfg.shrink : t;
    }

    x = std::move(x_new);
    cur = std::move(next);
    pg = projected_norm(x, cur.gradient);
    if (cfg.record_trace) trace.rows.push_back({iter, cur.value, pg, taken});
  }

  trace.iterations = iter;
  trace.converged = pg <= cfg.tol_grad;
  trace.final_grad_norm = pg;
  trace.mu_hat = x;
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {x, std::move(trace)};
}

/// Parameter error bound 2 beta sqrt(m) delta / alpha.
inline double error_bound(double delta, double alpha, double beta, int m) {
  if (!(alpha > 0.0)) throw Error("strong convexity constant must be positive");
  if (delta < 0.0 || beta < 0.0 || m <= 0) throw Error("delta, beta and m must be nonnegative");
  return 2.0 * beta * std::sqrt(static_cast<double>(m)) * delta / alpha;
}

/// Smallest Hessian eigenvalue of log Z over `points` evenly spaced points of
/// the segment [a, b].
inline double segment_min_eigenvalue(const OperatorBasis& basis, const VectorXd& a,
                                     const VectorXd& b, double beta, int points = 11) {
  double alpha = std::numeric_limits<double>::infinity();
  for (int k = 0; k < points; ++k) {
    const double s = points == 1 ? 0.0 : static_cast<double>(k) / (points - 1);
    alpha = std::min(alpha, hessian_logZ(basis, (1.0 - s) * a + s * b, beta).min_eigenvalue);
  }
  return alpha;
}

inline void write_trace_csv(std::ostream& out, const SolverTrace& trace) {
  out << "iter,objective,grad_norm,step\n";
  for (const auto& r : trace.rows)
    out << r.iter << ',' << format_double(r.objective) << ',' << format_double(r.grad_norm) << ','
        << format_double(r.step) << '\n';
}

inline std::string to_string(StepRule r) {
  switch (r) {
    case StepRule::fixed: return "fixed";
    case StepRule::backtracking: return "backtracking";
    case StepRule::newton: return "newton";
  }
  return "unknown";
}

inline std::string to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::linf: return "linf";
    case ConstraintKind::l2: return "l2";
    case ConstraintKind::none: return "none";
  }
  return "unknown";
}

inline nlohmann::json solver_config_to_json(const SolverConfig& cfg) {
  return {{"step_rule", to_string(cfg.step_rule)},
          {"fixed_step", cfg.fixed_step},
          {"armijo", cfg.armijo},
          {"shrink", cfg.shrink},
          {"tol_grad", cfg.tol_grad},
          {"max_iters", cfg.max_iters},
          {"constraint", to_string(cfg.constraint.kind)},
          {"radius", cfg.constraint.radius}};
}

inline SolverConfig solver_config_from_json(const nlohmann::json& j) {
  SolverConfig cfg;
  if (j.is_null()) return cfg;
  const std::string rule = j.value("step_rule", to_string(cfg.step_rule));
  if (rule == "fixed") cfg.step_rule = StepRule::fixed;
  else if (rule == "backtracking") cfg.step_rule = StepRule::backtracking;
  else if (rule == "newton") cfg.step_rule = StepRule::newton;
  else throw Error("solver.step_rule must be 'fixed', 'backtracking' or 'newton'");
  cfg.fixed_step = j.value("fixed_step", cfg.fixed_step);
  cfg.armijo = j.value("armijo", cfg.armijo);
  cfg.shrink = j.value("shrink", cfg.shrink);
  cfg.tol_grad = j.value("tol_grad", cfg.tol_grad);
  cfg.max_iters = j.value("max_iters", cfg.max_iters);
  const std::string kind = j.value("constraint", std::string("linf"));
  if (kind == "linf") cfg.constraint.kind = ConstraintKind::linf;
  else if (kind == "l2") cfg.constraint.kind = ConstraintKind::l2;
  else if (kind == "none") cfg.constraint.kind = ConstraintKind::none;
  else throw Error("solver.constraint must be 'linf', 'l2' or 'none'");
  cfg.constraint.radius = j.value("radius", cfg.constraint.radius);
  cfg.validate();
  return cfg;
}

}  // namespace gibbslearn

#endif  // GIBBSLEARN_MAXENT_HPP
