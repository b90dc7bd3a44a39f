/*
 * Copyright 2026 The trajgames Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef TRAJGAMES_SOLVER_HPP
#define TRAJGAMES_SOLVER_HPP

#include <chrono>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "trajgames/kkt.hpp"

namespace trajgames {

enum class SolveStatus { Converged, MaxIterations, LineSearchFailure, SingularSystem };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIterations: return "MaxIterations";
    case SolveStatus::LineSearchFailure: return "LineSearchFailure";
    case SolveStatus::SingularSystem: return "SingularSystem";
  }
  return "Unknown";
}

struct SolverOptions {
  double beta = 0.01;       // line-search sufficient decrease, in (0, 1/2)
  double tau = 0.5;         // backtracking factor, in (0, 1)
  double alpha_min = 1e-8;  // smallest step before line-search failure
  double tol_opt = 1e-2;    // threshold on ||G||_1
  double tol_feas = 1e-3;   // threshold on max constraint violation
  double rho0 = 1.0;
  double gamma = 10.0;
  double rho_max = 1e8;
  int max_newton = 50;  // per outer pass
  int max_outer = 20;
  double eps_reg = 1e-6;
  bool use_structured_solve = true;
  // Inner Newton stalls when ||G||_1 shrinks by less than this relative
  // amount over a 3-iteration window.
  double stall_rel_decrease = 1e-4;

  void validate() const {
    if (!(beta > 0.0 && beta < 0.5))
      throw std::invalid_argument("SolverOptions: beta must be in (0, 1/2)");
    if (!(tau > 0.0 && tau < 1.0))
      throw std::invalid_argument("SolverOptions: tau must be in (0, 1)");
    if (!(tol_opt > 0.0 && tol_feas > 0.0))
      throw std::invalid_argument("SolverOptions: tolerances must be > 0");
    if (!(gamma > 1.0))
      throw std::invalid_argument("SolverOptions: gamma must be > 1");
    if (!(alpha_min > 0.0) || !(rho0 > 0.0) || !(eps_reg >= 0.0))
      throw std::invalid_argument("SolverOptions: bad scalar option");
  }
};

/// One accepted Newton step (for auditing the line-search condition).
struct StepLog {
  int outer = 0;
  double gnorm_before = 0.0;
  double gnorm_after = 0.0;
  double alpha = 0.0;
};

/// Multiplier/penalty snapshot after each outer pass.
struct OuterLog {
  double gnorm = 0.0;
  double max_violation = 0.0;
  double min_ineq_lambda = 0.0;
  double rho_min = 0.0;
  double rho_max_seen = 0.0;
};

struct SolveReport {
  SolveStatus status = SolveStatus::MaxIterations;
  int newton_iters = 0;
  int outer_iters = 0;
  std::vector<double> residual_history;   // ||G||_1 at each inner evaluation
  std::vector<double> violation_history;  // max violation at each inner evaluation
  double wall_time = 0.0;                 // seconds
  double final_gnorm = std::numeric_limits<double>::infinity();
  double final_violation = std::numeric_limits<double>::infinity();
  std::vector<StepLog> step_log;
  std::vector<OuterLog> outer_log;
};

/// Zero-control forward rollout from x0, with zero multipliers.
inline PrimalDual initial_rollout(const GameProblem& prob) {
  PrimalDual y = PrimalDual::zero(prob);
  y.X = rollout_states(prob, y.U);
  return y;
}

/// Backtracking line search on the l1 residual norm: returns the largest
/// alpha in {1, tau, tau^2, ...} >= alpha_min with
/// ||G(y + alpha dy)||_1 < (1 - alpha beta) ||G(y)||_1, or nullopt.
inline std::optional<double> line_search(const GameProblem& prob, const ALState& al,
                                         const PrimalDual& y, const VectorXd& G,
                                         const VectorXd& dy, const SolverOptions& opts,
                                         double* gnorm_accepted = nullptr) {
  const Layout lay(prob);
  const double g0 = G.lpNorm<1>();
  for (double alpha = 1.0; alpha >= opts.alpha_min; alpha *= opts.tau) {
    PrimalDual trial = y;
    trial.add_scaled(lay, alpha, dy);
    const double g1 = residual(prob, trial, al).lpNorm<1>();
    if (g1 < (1.0 - alpha * opts.beta) * g0) {
      if (gnorm_accepted) *gnorm_accepted = g1;
      return alpha;
    }
  }
  return std::nullopt;
}

namespace detail {

struct InnerResult {
  bool converged = false;                      // ||G||_1 < tol_opt reached
  std::optional<SolveStatus> failure;          // LineSearchFailure / SingularSystem
  double gnorm = std::numeric_limits<double>::infinity();
  VectorXd C;  // constraint values at the exit point
  double violation = 0.0;
  int iters = 0;
};

/// Newton's method on the root-finding residual with lambda and rho frozen.
/// The penalty activation pattern is re-evaluated at every residual
/// evaluation. Mutates y in place; appends to the report logs.
inline InnerResult inner_newton(const GameProblem& prob, const ALState& al,
                                PrimalDual& y, const SolverOptions& opts,
                                KKTSystem& sys, int outer_index, SolveReport& report) {
  InnerResult res;
  std::vector<double> gnorms;
  for (int it = 0;; ++it) {
    assemble_kkt(prob, y, al, sys);
    const double gnorm = sys.G.lpNorm<1>();
    const TrajectoryView traj = make_view(prob, y.X, y.U);
    res.C = evaluate_constraints(prob.constraints, traj);
    res.violation = max_violation(res.C, prob.constraints.n_ci());
    res.gnorm = gnorm;
    report.residual_history.push_back(gnorm);
    report.violation_history.push_back(res.violation);

    if (gnorm < opts.tol_opt) {
      res.converged = true;
      return res;
    }
    if (it >= opts.max_newton) return res;
    gnorms.push_back(gnorm);
    const size_t ng = gnorms.size();
    if (ng >= 4 &&
        gnorms[ng - 1] > gnorms[ng - 4] * (1.0 - 3.0 * opts.stall_rel_decrease))
      return res;  // residual plateau; hand control back to the outer loop

    VectorXd dy;
    double eps = opts.eps_reg;
    try {
      dy = opts.use_structured_solve ? structured_solve(sys, eps)
                                     : newton_step(sys, eps);
    } catch (const SingularSystemError&) {
      res.failure = SolveStatus::SingularSystem;
      return res;
    }

    double gnorm_after = 0.0;
    std::optional<double> alpha = line_search(prob, al, y, sys.G, dy, opts, &gnorm_after);
    if (!alpha) {
      // One retry with much stronger regularization, then abort.
      eps = (eps > 0.0 ? eps : 1e-8) * 100.0;
      try {
        dy = opts.use_structured_solve ? structured_solve(sys, eps)
                                       : newton_step(sys, eps);
      } catch (const SingularSystemError&) {
        res.failure = SolveStatus::SingularSystem;
        return res;
      }
      alpha = line_search(prob, al, y, sys.G, dy, opts, &gnorm_after);
      if (!alpha) {
        res.failure = SolveStatus::LineSearchFailure;
        return res;
      }
    }

    y.add_scaled(sys.layout, *alpha, dy);
    ++res.iters;
    ++report.newton_iters;
    report.step_log.push_back({outer_index, gnorm, gnorm_after, *alpha});
  }
}

}  // namespace detail

/// Dual-ascent multiplier update: inequality rows are clamped at zero.
inline VectorXd dual_ascent(const ALState& al, const VectorXd& C_vals) {
  if (C_vals.size() != al.lambda.size())
    throw std::invalid_argument("dual_ascent: length mismatch");
  VectorXd lam = al.lambda + al.rho.cwiseProduct(C_vals);
  for (int k = 0; k < al.n_ci; ++k) lam[k] = std::max(0.0, lam[k]);
  return lam;
}

/// Increasing penalty schedule rho <- min(gamma rho, rho_max).
inline VectorXd penalty_update(const ALState& al) {
  if (!(al.gamma > 1.0)) throw std::invalid_argument("penalty_update: gamma must be > 1");
  return (al.gamma * al.rho).cwiseMin(al.rho_max);
}

struct SolveResult {
  PrimalDual y;
  ALState al;
  SolveReport report;
};

/// Full augmented-Lagrangian solve starting from a caller-provided
/// primal-dual point and multiplier state (used by warm-started MPC).
inline SolveResult solve_with_state(const GameProblem& prob, PrimalDual y, ALState al,
                                    const SolverOptions& opts) {
  opts.validate();
  const auto t_start = std::chrono::steady_clock::now();

  SolveResult out;
  SolveReport& report = out.report;
  KKTSystem sys;

  PrimalDual best_y = y;
  ALState best_al = al;
  double best_viol_excess = std::numeric_limits<double>::infinity();
  double best_gnorm = std::numeric_limits<double>::infinity();

  auto consider_best = [&](double gnorm, double viol) {
    const double excess = std::max(viol - opts.tol_feas, 0.0);
    if (excess < best_viol_excess ||
        (excess == best_viol_excess && gnorm < best_gnorm)) {
      best_viol_excess = excess;
      best_gnorm = gnorm;
      best_y = y;
      best_al = al;
    }
  };

  report.status = SolveStatus::MaxIterations;
  for (int outer = 1; outer <= opts.max_outer; ++outer) {
    detail::InnerResult inner =
        detail::inner_newton(prob, al, y, opts, sys, outer, report);
    report.outer_iters = outer;
    report.final_gnorm = inner.gnorm;
    report.final_violation = inner.violation;

    double min_lam = 0.0;
    if (al.n_ci > 0) min_lam = al.lambda.head(al.n_ci).minCoeff();
    report.outer_log.push_back({inner.gnorm, inner.violation, min_lam,
                                al.rho.size() ? al.rho.minCoeff() : 0.0,
                                al.rho.size() ? al.rho.maxCoeff() : 0.0});
    consider_best(inner.gnorm, inner.violation);

    if (inner.failure) {
      report.status = *inner.failure;
      break;
    }
    if (inner.converged && inner.violation <= opts.tol_feas) {
      report.status = SolveStatus::Converged;
      break;
    }
    al.lambda = dual_ascent(al, inner.C);
    al.rho = penalty_update(al);
  }

  if (report.status == SolveStatus::Converged) {
    out.y = std::move(y);
    out.al = std::move(al);
  } else {
    out.y = std::move(best_y);
    out.al = std::move(best_al);
    // Recompute exactly at the returned iterate so the report matches it.
    report.final_gnorm = residual(prob, out.y, out.al).lpNorm<1>();
    const TrajectoryView traj = make_view(prob, out.y.X, out.y.U);
    report.final_violation = max_violation(
        evaluate_constraints(prob.constraints, traj), prob.constraints.n_ci());
  }

  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

/// ALGAMES-style outer loop: fresh multipliers, zero-control rollout unless
/// a start point is supplied, then alternate inner Newton solves with dual
/// ascent and the penalty schedule until both tolerances hold.
inline SolveResult solve(const GameProblem& prob, std::optional<PrimalDual> y0,
                         const SolverOptions& opts) {
  PrimalDual y = y0 ? std::move(*y0) : initial_rollout(prob);
  ALState al = ALState::fresh(prob.constraints, opts.rho0, opts.gamma, opts.rho_max);
  return solve_with_state(prob, std::move(y), std::move(al), opts);
}

}  // namespace trajgames

#endif  // TRAJGAMES_SOLVER_HPP
