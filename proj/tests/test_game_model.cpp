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
#include "trajgames/problem.hpp"
#include "trajgames/scenarios.hpp"

using namespace trajgames;
using namespace trajgames::testing;
using Catch::Approx;

namespace {

JointDynamics single_unicycle(double dt, IntegratorKind kind) {
  return make_unicycle_dynamics(1, dt, kind);
}

VectorXd vec4(double a, double b, double c, double d) {
  VectorXd v(4);
  v << a, b, c, d;
  return v;
}

}  // namespace

TEST_CASE("dynamics_step on a straight-driving unicycle") {
  const VectorXd x = vec4(0, 0, 0, 1);
  const VectorXd u = VectorXd::Zero(2);
  const VectorXd euler =
      dynamics_step(single_unicycle(0.1, IntegratorKind::ExplicitEuler), x, u);
  REQUIRE(euler.isApprox(vec4(0.1, 0, 0, 1), 1e-14));
  // The right-hand side is constant along straight motion, so RK4 agrees.
  const VectorXd rk4 = dynamics_step(single_unicycle(0.1, IntegratorKind::RK4), x, u);
  REQUIRE(rk4.isApprox(vec4(0.1, 0, 0, 1), 1e-14));

  const VectorXd up = dynamics_step(
      single_unicycle(0.05, IntegratorKind::ExplicitEuler), vec4(0, 0, M_PI_2, 2), u);
  REQUIRE(up[0] == Approx(0.0).margin(1e-15));
  REQUIRE(up[1] == Approx(0.1));
  REQUIRE(up[2] == Approx(M_PI_2));
  REQUIRE(up[3] == Approx(2.0));
}

TEST_CASE("dynamics_step rejects dimension mismatches") {
  const JointDynamics dyn = single_unicycle(0.1, IntegratorKind::RK4);
  REQUIRE_THROWS_AS(dynamics_step(dyn, VectorXd::Zero(3), VectorXd::Zero(2)),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(dynamics_step(dyn, VectorXd::Zero(4), VectorXd::Zero(1)),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(dynamics_jacobians(dyn, VectorXd::Zero(4), VectorXd::Zero(3)),
                    std::invalid_argument);
}

TEST_CASE("JointDynamics construction validates its invariants") {
  auto rhs = [](const VectorXd& x, const VectorXd&) { return x; };
  auto jac = [](const VectorXd& x, const VectorXd& u) {
    return std::make_pair(MatrixXd::Identity(x.size(), x.size()),
                          MatrixXd::Zero(x.size(), u.size()));
  };
  REQUIRE_THROWS_AS(JointDynamics(0, {1}, 0.1, rhs, jac), std::invalid_argument);
  REQUIRE_THROWS_AS(JointDynamics(2, {1, 0}, 0.1, rhs, jac), std::invalid_argument);
  REQUIRE_THROWS_AS(JointDynamics(2, {1}, 0.0, rhs, jac), std::invalid_argument);
}

TEST_CASE("dynamics_jacobians returns the exact matrices for linear dynamics") {
  std::mt19937_64 rng(11);
  const MatrixXd Ad = random_mat(rng, 3, 3);
  const MatrixXd Bd = random_mat(rng, 3, 2);
  const JointDynamics dyn = make_linear_dynamics(
      Ad - MatrixXd::Identity(3, 3), Bd, {1, 1}, 1.0, IntegratorKind::ExplicitEuler);
  auto [A, B] = dynamics_jacobians(dyn, random_vec(rng, 3), random_vec(rng, 2));
  REQUIRE(rel_err(A, Ad) < 1e-14);
  REQUIRE(rel_err(B, Bd) < 1e-14);
}

TEST_CASE("unicycle Euler Jacobian entries at theta=0, v=1") {
  const double dt = 0.1;
  const JointDynamics dyn = single_unicycle(dt, IntegratorKind::ExplicitEuler);
  auto [A, B] = dynamics_jacobians(dyn, vec4(0, 0, 0, 1), VectorXd::Zero(2));
  // d px' / d theta = -v sin(theta) = 0; d px' / d v = cos(theta) = 1.
  REQUIRE(A(0, 2) == Approx(0.0).margin(1e-14));
  REQUIRE(A(0, 3) == Approx(dt));
  const MatrixXd fd = fd_jacobian(
      [&](const VectorXd& x) { return dynamics_step(dyn, x, VectorXd::Zero(2)); },
      vec4(0, 0, 0, 1));
  REQUIRE(rel_err(A, fd) < 1e-5);
}

TEST_CASE("dynamics_jacobians match finite differences at random points") {
  std::mt19937_64 rng(7);
  for (IntegratorKind kind : {IntegratorKind::ExplicitEuler, IntegratorKind::RK4}) {
    const JointDynamics dyn = make_unicycle_dynamics(2, 0.1, kind);
    for (int trial = 0; trial < 100; ++trial) {
      const VectorXd x = random_vec(rng, 8, 2.0);
      const VectorXd u = random_vec(rng, 4, 1.0);
      auto [A, B] = dynamics_jacobians(dyn, x, u);
      const MatrixXd A_fd =
          fd_jacobian([&](const VectorXd& xx) { return dynamics_step(dyn, xx, u); }, x);
      const MatrixXd B_fd =
          fd_jacobian([&](const VectorXd& uu) { return dynamics_step(dyn, x, uu); }, u);
      REQUIRE(rel_err(A, A_fd) < 1e-5);
      REQUIRE(rel_err(B, B_fd) < 1e-5);
    }
  }
}

TEST_CASE("stacked_dynamics_residual vanishes exactly on rollouts") {
  std::mt19937_64 rng(3);
  const GameProblem prob = random_lq_game(rng, 2, 6, 3, {1, 2});
  PrimalDual y = PrimalDual::zero(prob);
  for (int nu = 0; nu < prob.M; ++nu)
    y.U[static_cast<size_t>(nu)] = random_vec(rng, prob.mbar_nu(nu));
  y.X = rollout_states(prob, y.U);
  const VectorXd D = stacked_dynamics_residual(prob, y.X, y.U);
  REQUIRE(D.cwiseAbs().maxCoeff() == 0.0);  // bitwise: same integrator path
}

TEST_CASE("a defect in the last state shows up only in the last block") {
  // N = 3: X = (x_1, x_2); perturbing the final state x_2 leaves block 0
  // untouched and shifts block 1 by exactly the perturbation.
  std::mt19937_64 rng(4);
  const GameProblem prob = random_lq_game(rng, 1, 3, 2, {1});
  PrimalDual y = PrimalDual::zero(prob);
  y.U[0] = random_vec(rng, prob.mbar_nu(0));
  y.X = rollout_states(prob, y.U);
  VectorXd delta(2);
  delta << 0.25, -0.5;
  VectorXd X_pert = y.X;
  X_pert.segment(2, 2) += delta;
  const VectorXd D = stacked_dynamics_residual(prob, X_pert, y.U);
  REQUIRE(D.segment(0, 2).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((D.segment(2, 2) - delta).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("perturbing an interior state touches only adjacent blocks") {
  std::mt19937_64 rng(5);
  const GameProblem prob = random_lq_game(rng, 2, 8, 3, {1, 1});
  PrimalDual y = PrimalDual::zero(prob);
  for (int nu = 0; nu < prob.M; ++nu)
    y.U[static_cast<size_t>(nu)] = random_vec(rng, prob.mbar_nu(nu));
  y.X = rollout_states(prob, y.U);
  const int t = 4;  // perturb x_4: blocks 3 and 4 may change
  VectorXd X_pert = y.X;
  X_pert.segment((t - 1) * 3, 3) += random_vec(rng, 3, 0.1);
  const VectorXd D = stacked_dynamics_residual(prob, X_pert, y.U);
  for (int k = 0; k < prob.stages(); ++k) {
    const double blk = D.segment(3 * k, 3).cwiseAbs().maxCoeff();
    if (k == t - 1 || k == t) continue;
    REQUIRE(blk == 0.0);
  }
}

TEST_CASE("stacked_dynamics_residual matches direct re-simulation") {
  std::mt19937_64 rng(6);
  const GameProblem prob = random_lq_game(rng, 2, 7, 3, {2, 1});
  const PrimalDual y = random_point(rng, prob);
  const VectorXd D = stacked_dynamics_residual(prob, y.X, y.U);
  // Independent step-by-step defect computation.
  const TrajectoryView traj = make_view(prob, y.X, y.U);
  for (int k = 0; k < prob.stages(); ++k) {
    const VectorXd expected =
        VectorXd(traj.state(k + 1)) -
        dynamics_step(prob.dynamics, traj.state(k), traj.joint_control(k));
    REQUIRE((D.segment(3 * k, 3) - expected).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("cost_eval basics") {
  const int n = 3;
  std::mt19937_64 rng(8);
  const VectorXd xf = random_vec(rng, n);
  const PlayerCost cost(MatrixXd::Identity(n, n), MatrixXd::Identity(2, 2),
                        2.0 * MatrixXd::Identity(n, n), xf);

  SECTION("zero error and zero control give zero cost") {
    const int S = 4;
    VectorXd X(n * S);
    for (int s = 0; s < S; ++s) X.segment(n * s, n) = xf;
    REQUIRE(cost_eval(cost, X, VectorXd::Zero(2 * S)) == 0.0);
  }

  SECTION("N=2 reduces to the single terminal term") {
    PlayerCost c2(MatrixXd::Zero(n, n), MatrixXd::Identity(2, 2),
                  MatrixXd::Identity(n, n), VectorXd::Zero(n));
    VectorXd X(n);
    X << 1, 0, 0;
    REQUIRE(cost_eval(c2, X, VectorXd::Zero(2)) == Approx(0.5));
  }

  SECTION("matches a brute-force loop on random data") {
    const int S = 5;
    const VectorXd X = random_vec(rng, n * S);
    const VectorXd U = random_vec(rng, 2 * S);
    double expected = 0.0;
    for (int s = 0; s < S - 1; ++s) {
      const VectorXd dx = X.segment(n * s, n) - xf;
      expected += 0.5 * dx.dot(cost.Q * dx);
    }
    const VectorXd dxN = X.segment(n * (S - 1), n) - xf;
    expected += 0.5 * dxN.dot(cost.Qf * dxN);
    for (int k = 0; k < S; ++k)
      expected += 0.5 * U.segment(2 * k, 2).dot(cost.R * U.segment(2 * k, 2));
    REQUIRE(cost_eval(cost, X, U) == Approx(expected));
  }
}

TEST_CASE("game_cost ignores other players' controls") {
  std::mt19937_64 rng(9);
  const GameProblem prob = random_lq_game(rng, 3, 6, 3, {1, 2, 1});
  PrimalDual y = random_point(rng, prob);
  const double J1 = game_cost(prob, 1, y.X, y.U);
  y.U[0] = random_vec(rng, prob.mbar_nu(0));
  y.U[2] = random_vec(rng, prob.mbar_nu(2));
  REQUIRE(game_cost(prob, 1, y.X, y.U) == J1);
}

TEST_CASE("cost_derivatives") {
  std::mt19937_64 rng(10);
  const int n = 3, mv = 2, S = 4;
  VectorXd qd(n), rd(mv), qfd(n);
  qd << 0.5, 1.0, 0.2;
  rd << 0.7, 0.3;
  qfd << 2.0, 1.0, 0.1;
  const VectorXd xf = random_vec(rng, n);
  const PlayerCost cost(MatrixXd(qd.asDiagonal()), MatrixXd(rd.asDiagonal()),
                        MatrixXd(qfd.asDiagonal()), xf);

  SECTION("gradient vanishes at the unconstrained minimizer") {
    VectorXd X(n * S);
    for (int s = 0; s < S; ++s) X.segment(n * s, n) = xf;
    auto [g, H] = cost_derivatives(cost, X, VectorXd::Zero(mv * S));
    REQUIRE(g.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("gradient matches central finite differences") {
    const VectorXd X = random_vec(rng, n * S);
    const VectorXd U = random_vec(rng, mv * S);
    auto [g, H] = cost_derivatives(cost, X, U);
    VectorXd z(X.size() + U.size());
    z << X, U;
    const VectorXd g_fd = fd_gradient(
        [&](const VectorXd& zz) {
          return cost_eval(cost, zz.segment(0, X.size()), zz.segment(X.size(), U.size()));
        },
        z);
    REQUIRE(rel_err(g, g_fd) < 1e-6);
  }

  SECTION("Hessian is constant and block diagonal") {
    const VectorXd X1 = random_vec(rng, n * S), X2 = random_vec(rng, n * S);
    const VectorXd U1 = random_vec(rng, mv * S), U2 = random_vec(rng, mv * S);
    auto [g1, H1] = cost_derivatives(cost, X1, U1);
    auto [g2, H2] = cost_derivatives(cost, X2, U2);
    REQUIRE((H1 - H2).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(H1.block(0, 0, n, n).isApprox(MatrixXd(qd.asDiagonal())));
    REQUIRE(H1.block(n * S, n * S, mv, mv).isApprox(MatrixXd(rd.asDiagonal())));
  }
}

TEST_CASE("PlayerCost validates symmetry and definiteness") {
  MatrixXd asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  REQUIRE_THROWS_AS(PlayerCost(asym, MatrixXd::Identity(1, 1),
                               MatrixXd::Identity(2, 2), VectorXd::Zero(2)),
                    std::invalid_argument);
  MatrixXd indef(2, 2);
  indef << 1.0, 0.0, 0.0, -0.1;
  REQUIRE_THROWS_AS(PlayerCost(MatrixXd::Identity(2, 2), indef,
                               MatrixXd::Identity(2, 2), VectorXd::Zero(2)),
                    std::invalid_argument);
  // Zero R is not positive definite.
  REQUIRE_THROWS_AS(PlayerCost(MatrixXd::Identity(2, 2), MatrixXd::Zero(1, 1),
                               MatrixXd::Identity(2, 2), VectorXd::Zero(2)),
                    std::invalid_argument);
  // PSD Q with a zero eigenvalue is fine.
  MatrixXd psd(2, 2);
  psd << 1.0, 0.0, 0.0, 0.0;
  REQUIRE_NOTHROW(PlayerCost(psd, MatrixXd::Identity(1, 1), psd, VectorXd::Zero(2)));
}

TEST_CASE("GameProblem validates sizes") {
  std::mt19937_64 rng(12);
  GameProblem good = random_lq_game(rng, 2, 5, 3, {1, 1});
  REQUIRE_THROWS_AS(GameProblem(1, good.dynamics, good.costs, ConstraintSet{}, good.x0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(
      GameProblem(5, good.dynamics, good.costs, ConstraintSet{}, VectorXd::Zero(2)),
      std::invalid_argument);
  std::vector<PlayerCost> one_cost = {good.costs[0]};
  REQUIRE_THROWS_AS(GameProblem(5, good.dynamics, one_cost, ConstraintSet{}, good.x0),
                    std::invalid_argument);
}
