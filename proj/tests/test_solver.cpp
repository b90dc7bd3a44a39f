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

#include <catch2/catch_amalgamated.hpp>

#include "support/test_helpers.hpp"
#include "trajgames/scenarios.hpp"
#include "trajgames/solver.hpp"

using namespace trajgames;
using namespace trajgames::testing;
using Catch::Approx;

TEST_CASE("line_search accepts the full step when it lands on the root") {
  std::mt19937_64 rng(1);
  const GameProblem prob = random_lq_game(rng, 2, 5, 3, {1, 1});
  const ALState al = ALState::fresh(prob.constraints, 1.0, 10.0, 1e8);
  const PrimalDual y = random_point(rng, prob);
  KKTSystem sys;
  assemble_kkt(prob, y, al, sys);
  const VectorXd dy = newton_step(sys, 0.0);  // linear residual: exact root step
  const auto alpha = line_search(prob, al, y, sys.G, dy, SolverOptions{});
  REQUIRE(alpha.has_value());
  REQUIRE(*alpha == 1.0);
}

TEST_CASE("line_search fails on a zero direction") {
  std::mt19937_64 rng(2);
  const GameProblem prob = random_lq_game(rng, 2, 5, 3, {1, 1});
  const ALState al = ALState::fresh(prob.constraints, 1.0, 10.0, 1e8);
  const PrimalDual y = random_point(rng, prob);
  KKTSystem sys;
  assemble_kkt(prob, y, al, sys);
  REQUIRE(sys.G.lpNorm<1>() > 0.0);
  const VectorXd dy = VectorXd::Zero(sys.G.size());
  REQUIRE_FALSE(line_search(prob, al, y, sys.G, dy, SolverOptions{}).has_value());
}

TEST_CASE("line_search honors the sufficient-decrease inequality") {
  // Partial steps on the linear residual: G(y + a*dy) = (1-a) G(y), so the
  // largest accepted alpha must satisfy (1-a) < 1 - a*beta strictly.
  std::mt19937_64 rng(3);
  const GameProblem prob = random_lq_game(rng, 2, 5, 3, {1, 1});
  const ALState al = ALState::fresh(prob.constraints, 1.0, 10.0, 1e8);
  const PrimalDual y = random_point(rng, prob);
  KKTSystem sys;
  assemble_kkt(prob, y, al, sys);
  const VectorXd dy = 0.5 * newton_step(sys, 0.0);  // direction scaled down
  SolverOptions opts;
  double g_after = 0.0;
  const auto alpha = line_search(prob, al, y, sys.G, dy, opts, &g_after);
  REQUIRE(alpha.has_value());
  REQUIRE(g_after < (1.0 - *alpha * opts.beta) * sys.G.lpNorm<1>());
}

TEST_CASE("dual_ascent updates follow the two branches") {
  ConstraintSet set;
  set.inequality_fns.resize(2);
  set.equality_fns.resize(1);
  ALState al = ALState::fresh(set, 1.0, 10.0, 1e8);

  al.lambda << 0.0, 0.2, 1.0;
  al.rho << 1.0, 1.0, 2.0;
  VectorXd C(3);
  C << 0.5, -0.5, -0.25;
  const VectorXd lam = dual_ascent(al, C);
  REQUIRE(lam[0] == Approx(0.5));   // 0 + 1*0.5
  REQUIRE(lam[1] == 0.0);           // clamped at zero
  REQUIRE(lam[2] == Approx(0.5));   // equality: 1 + 2*(-0.25)
}

TEST_CASE("inequality multipliers stay nonnegative under random ascents") {
  std::mt19937_64 rng(4);
  ConstraintSet set;
  set.inequality_fns.resize(5);
  set.equality_fns.resize(2);
  ALState al = ALState::fresh(set, 1.0, 10.0, 1e8);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd C(7);
    for (int i = 0; i < 7; ++i) C[i] = u(rng);
    al.lambda = dual_ascent(al, C);
    for (int i = 0; i < al.n_ci; ++i) REQUIRE(al.lambda[i] >= 0.0);
    al.rho = penalty_update(al);
  }
}

TEST_CASE("penalty_update applies the saturating schedule") {
  ConstraintSet set;
  set.inequality_fns.resize(2);
  ALState al = ALState::fresh(set, 1.0, 10.0, 1e8);

  al.rho << 1.0, 1.0;
  REQUIRE(penalty_update(al).isApprox(VectorXd::Constant(2, 10.0)));

  al.rho << 1e8, 3.0;
  al.rho_max = 1e8;
  const VectorXd r = penalty_update(al);
  REQUIRE(r[0] == 1e8);  // saturates at the cap
  REQUIRE(r[1] == Approx(30.0));

  al.gamma = 2.0;
  al.rho << 3.0, 1.0;
  REQUIRE(penalty_update(al)[0] == Approx(6.0));
}

TEST_CASE("initial_rollout is dynamically feasible and zero elsewhere") {
  const ScenarioSpec spec = ramp_merge_spec(3);
  const GameProblem prob = build_scenario(spec);
  const PrimalDual y = initial_rollout(prob);
  REQUIRE(stacked_dynamics_residual(prob, y.X, y.U).cwiseAbs().maxCoeff() == 0.0);
  for (int nu = 0; nu < prob.M; ++nu) {
    REQUIRE(y.U[static_cast<size_t>(nu)].cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(y.mu[static_cast<size_t>(nu)].cwiseAbs().maxCoeff() == 0.0);
  }
  // Matches chained dynamics_step calls bitwise.
  VectorXd x = prob.x0;
  for (int k = 0; k < prob.stages(); ++k) {
    x = dynamics_step(prob.dynamics, x, VectorXd::Zero(prob.m()));
    REQUIRE((y.X.segment(static_cast<long>(k) * prob.n(), prob.n()) - x)
                .cwiseAbs()
                .maxCoeff() == 0.0);
  }
}

TEST_CASE("unicycle fleet rollout drives straight at constant speed") {
  ScenarioSpec spec = ramp_merge_spec(2);
  const GameProblem prob = build_scenario(spec);
  const PrimalDual y = initial_rollout(prob);
  const double dt = spec.dt();
  for (int nu = 0; nu < prob.M; ++nu) {
    const Vector4d s = spec.players[static_cast<size_t>(nu)].start;
    const int S = prob.stages();
    const VectorXd xa = y.X.segment(static_cast<long>(S - 1) * prob.n() + 4 * nu, 4);
    REQUIRE(xa[0] == Approx(s[0] + s[3] * std::cos(s[2]) * dt * S).epsilon(1e-12));
    REQUIRE(xa[1] == Approx(s[1] + s[3] * std::sin(s[2]) * dt * S).epsilon(1e-12));
    REQUIRE(xa[3] == Approx(s[3]));
  }
}

TEST_CASE("unconstrained LQ games solve in one Newton iteration of one outer pass") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const GameProblem prob = random_lq_game(rng, 2, 6, 3, {1, 2});
    SolverOptions opts;
    const SolveResult res = solve(prob, std::nullopt, opts);
    REQUIRE(res.report.status == SolveStatus::Converged);
    REQUIRE(res.report.outer_iters == 1);
    REQUIRE(res.report.newton_iters == 1);
  }
}

TEST_CASE("starting at an exact root takes zero iterations") {
  std::mt19937_64 rng(6);
  const GameProblem prob = random_lq_game(rng, 2, 6, 3, {1, 1});
  SolverOptions opts;
  opts.eps_reg = 0.0;
  const SolveResult first = solve(prob, std::nullopt, opts);
  REQUIRE(first.report.status == SolveStatus::Converged);
  const SolveResult again = solve(prob, first.y, opts);
  REQUIRE(again.report.status == SolveStatus::Converged);
  REQUIRE(again.report.newton_iters == 0);
  REQUIRE(again.report.outer_iters == 1);
}

TEST_CASE("solve matches the monolithic LQ KKT oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const GameProblem prob = random_lq_game(rng, 2 + trial % 2, 6, 3, {1, 1, 1});
    const LqNashSolution oracle = lq_nash_oracle(prob);
    REQUIRE(oracle.unique);
    SolverOptions opts;
    opts.eps_reg = 0.0;
    opts.tol_opt = 1e-8;
    const SolveResult res = solve(prob, std::nullopt, opts);
    REQUIRE(res.report.status == SolveStatus::Converged);
    REQUIRE(rel_err(res.y.X, oracle.X) < 1e-6);
    for (int nu = 0; nu < prob.M; ++nu)
      REQUIRE(rel_err(res.y.U[static_cast<size_t>(nu)],
                      oracle.U[static_cast<size_t>(nu)]) < 1e-6);
  }
}

TEST_CASE("infeasible game ends in MaxIterations with a violation plateau") {
  const GameProblem prob = build_scenario(infeasible_spec());
  SolverOptions opts;
  opts.max_outer = 8;
  const SolveResult res = solve(prob, std::nullopt, opts);
  REQUIRE(res.report.status == SolveStatus::MaxIterations);
  REQUIRE(res.report.final_violation > 0.1);  // plateau far above tolerance
  REQUIRE(res.report.outer_iters == 8);
}

TEST_CASE("solver is deterministic") {
  const GameProblem prob = build_scenario(ramp_merge_spec(2));
  const SolveResult a = solve(prob, std::nullopt, SolverOptions{});
  const SolveResult b = solve(prob, std::nullopt, SolverOptions{});
  REQUIRE(a.report.newton_iters == b.report.newton_iters);
  REQUIRE(a.report.outer_iters == b.report.outer_iters);
  REQUIRE(a.report.residual_history == b.report.residual_history);
  REQUIRE((a.y.X - b.y.X).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("every accepted step satisfied the line-search condition") {
  const GameProblem prob = build_scenario(ramp_merge_spec(3));
  SolverOptions opts;
  const SolveResult res = solve(prob, std::nullopt, opts);
  REQUIRE(res.report.status == SolveStatus::Converged);
  REQUIRE_FALSE(res.report.step_log.empty());
  for (const StepLog& s : res.report.step_log)
    REQUIRE(s.gnorm_after < (1.0 - s.alpha * opts.beta) * s.gnorm_before);
}

TEST_CASE("converged status round-trips against independent re-evaluation") {
  const GameProblem prob = build_scenario(ramp_merge_spec(3));
  SolverOptions opts;
  const SolveResult res = solve(prob, std::nullopt, opts);
  REQUIRE(res.report.status == SolveStatus::Converged);
  const double gnorm = residual(prob, res.y, res.al).lpNorm<1>();
  const TrajectoryView traj = make_view(prob, res.y.X, res.y.U);
  const double viol = max_violation(evaluate_constraints(prob.constraints, traj),
                                    prob.constraints.n_ci());
  REQUIRE(gnorm < opts.tol_opt);
  REQUIRE(viol <= opts.tol_feas);
  REQUIRE(gnorm == Approx(res.report.final_gnorm).margin(1e-12));
  REQUIRE(viol == Approx(res.report.final_violation).margin(1e-12));
}

TEST_CASE("rho never decreases and stays capped across a solve") {
  GameProblem prob = build_scenario(infeasible_spec());
  SolverOptions opts;
  opts.max_outer = 12;
  opts.rho_max = 1e6;
  const SolveResult res = solve(prob, std::nullopt, opts);
  double prev = 0.0;
  for (const OuterLog& o : res.report.outer_log) {
    REQUIRE(o.rho_min >= prev);
    REQUIRE(o.rho_max_seen <= opts.rho_max);
    REQUIRE(o.min_ineq_lambda >= 0.0);
    prev = o.rho_min;
  }
}

TEST_CASE("SolverOptions validation rejects out-of-range parameters") {
  SolverOptions opts;
  opts.beta = 0.5;
  REQUIRE_THROWS_AS(opts.validate(), std::invalid_argument);
  opts = SolverOptions{};
  opts.tau = 1.0;
  REQUIRE_THROWS_AS(opts.validate(), std::invalid_argument);
  opts = SolverOptions{};
  opts.gamma = 1.0;
  REQUIRE_THROWS_AS(opts.validate(), std::invalid_argument);
}
