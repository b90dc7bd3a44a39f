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

#ifndef TRAJGAMES_PROBLEM_HPP
#define TRAJGAMES_PROBLEM_HPP

#include <stdexcept>
#include <utility>
#include <vector>

#include "trajgames/constraints.hpp"
#include "trajgames/costs.hpp"
#include "trajgames/dynamics.hpp"

namespace trajgames {

/// Immutable description of an M-player constrained dynamic game.
struct GameProblem {
  int M = 0;
  int N = 0;  // number of time steps; S = N-1 stages
  JointDynamics dynamics;
  std::vector<PlayerCost> costs;
  ConstraintSet constraints;
  VectorXd x0;

  GameProblem() = default;
  GameProblem(int N_, JointDynamics dyn, std::vector<PlayerCost> costs_,
              ConstraintSet cons, VectorXd x0_)
      : M(dyn.num_players()),
        N(N_),
        dynamics(std::move(dyn)),
        costs(std::move(costs_)),
        constraints(std::move(cons)),
        x0(std::move(x0_)) {
    if (N < 2) throw std::invalid_argument("GameProblem: N must be >= 2");
    if (M < 1) throw std::invalid_argument("GameProblem: M must be >= 1");
    if (static_cast<int>(costs.size()) != M)
      throw std::invalid_argument("GameProblem: need one PlayerCost per player");
    if (x0.size() != dynamics.n)
      throw std::invalid_argument("GameProblem: x0 dimension mismatch");
    for (int nu = 0; nu < M; ++nu) {
      if (costs[static_cast<size_t>(nu)].state_dim() != dynamics.n ||
          costs[static_cast<size_t>(nu)].control_dim() != dynamics.m_per_player[nu])
        throw std::invalid_argument("GameProblem: cost dimensions mismatch");
    }
  }

  int n() const { return dynamics.n; }
  int m() const { return dynamics.m_total(); }
  int m_nu(int nu) const { return dynamics.m_per_player[static_cast<size_t>(nu)]; }
  int stages() const { return N - 1; }
  long nbar() const { return static_cast<long>(n()) * stages(); }
  long mbar() const { return static_cast<long>(m()) * stages(); }
  long mbar_nu(int nu) const { return static_cast<long>(m_nu(nu)) * stages(); }

  /// Clone with a different initial state (everything else shared).
  GameProblem with_initial_state(const VectorXd& x0_new) const {
    GameProblem p = *this;
    if (x0_new.size() != dynamics.n)
      throw std::invalid_argument("with_initial_state: x0 dimension mismatch");
    p.x0 = x0_new;
    return p;
  }
};

/// Index bookkeeping for the stacked unknown y = [X; U^1..U^M; mu^1..mu^M]
/// and the stacked residual G = [G^1; ..; G^M; D]. Time-major within every
/// block.
struct Layout {
  int M = 0, N = 0, n = 0, m = 0, S = 0;
  std::vector<int> m_nu;
  long nbar = 0, mbar = 0;
  std::vector<long> u_offset;   // offset of U^nu inside y
  std::vector<long> mu_offset;  // offset of mu^nu inside y
  std::vector<long> g_offset;   // offset of G^nu inside G
  long d_offset = 0;            // offset of D inside G
  long total = 0;               // order of the square system

  Layout() = default;
  explicit Layout(const GameProblem& prob)
      : M(prob.M), N(prob.N), n(prob.n()), m(prob.m()), S(prob.stages()) {
    m_nu = prob.dynamics.m_per_player;
    nbar = prob.nbar();
    mbar = prob.mbar();
    u_offset.resize(static_cast<size_t>(M));
    mu_offset.resize(static_cast<size_t>(M));
    g_offset.resize(static_cast<size_t>(M));
    long off = nbar;
    for (int nu = 0; nu < M; ++nu) {
      u_offset[static_cast<size_t>(nu)] = off;
      off += static_cast<long>(m_nu[static_cast<size_t>(nu)]) * S;
    }
    for (int nu = 0; nu < M; ++nu) {
      mu_offset[static_cast<size_t>(nu)] = off;
      off += nbar;
    }
    total = off;
    long goff = 0;
    for (int nu = 0; nu < M; ++nu) {
      g_offset[static_cast<size_t>(nu)] = goff;
      goff += nbar + static_cast<long>(m_nu[static_cast<size_t>(nu)]) * S;
    }
    d_offset = goff;
  }

  // y-column helpers. t is a state time in [1, N-1], k a stage in [0, S-1].
  long x_col(int t) const { return static_cast<long>(t - 1) * n; }
  long u_col(int nu, int k) const {
    return u_offset[static_cast<size_t>(nu)] +
           static_cast<long>(k) * m_nu[static_cast<size_t>(nu)];
  }
  long mu_col(int nu, int k) const {
    return mu_offset[static_cast<size_t>(nu)] + static_cast<long>(k) * n;
  }

  // G-row helpers.
  long gx_row(int nu, int t) const {
    return g_offset[static_cast<size_t>(nu)] + static_cast<long>(t - 1) * n;
  }
  long gu_row(int nu, int k) const {
    return g_offset[static_cast<size_t>(nu)] + nbar +
           static_cast<long>(k) * m_nu[static_cast<size_t>(nu)];
  }
  long d_row(int k) const { return d_offset + static_cast<long>(k) * n; }
};

/// Forward simulation of the stacked per-player controls from x0. Returns the
/// stacked decision states x_1..x_{N-1}.
inline VectorXd rollout_states(const GameProblem& prob,
                               const std::vector<VectorXd>& U) {
  const int n = prob.n();
  const int S = prob.stages();
  VectorXd X(prob.nbar());
  VectorXd x = prob.x0;
  VectorXd u(prob.m());
  for (int k = 0; k < S; ++k) {
    int off = 0;
    for (int nu = 0; nu < prob.M; ++nu) {
      const int mv = prob.m_nu(nu);
      u.segment(off, mv) = U[static_cast<size_t>(nu)].segment(static_cast<long>(k) * mv, mv);
      off += mv;
    }
    x = dynamics_step(prob.dynamics, x, u);
    X.segment(static_cast<long>(k) * n, n) = x;
  }
  return X;
}

inline TrajectoryView make_view(const GameProblem& prob, const VectorXd& X,
                                const std::vector<VectorXd>& U) {
  TrajectoryView v;
  v.n = prob.n();
  v.N = prob.N;
  v.m_per_player = &prob.dynamics.m_per_player;
  v.x0 = &prob.x0;
  v.X = &X;
  v.U = &U;
  return v;
}

/// Stacked dynamics defect D(X, U): block k equals x_{k+1} - f(x_k, u_k),
/// with x_0 pinned to the problem's initial state. Zero iff X is the forward
/// rollout of U.
inline VectorXd stacked_dynamics_residual(const GameProblem& prob, const VectorXd& X,
                                          const std::vector<VectorXd>& U) {
  const int n = prob.n();
  const int S = prob.stages();
  if (X.size() != prob.nbar())
    throw std::invalid_argument("stacked_dynamics_residual: X dimension mismatch");
  if (static_cast<int>(U.size()) != prob.M)
    throw std::invalid_argument("stacked_dynamics_residual: U player count mismatch");
  for (int nu = 0; nu < prob.M; ++nu)
    if (U[static_cast<size_t>(nu)].size() != prob.mbar_nu(nu))
      throw std::invalid_argument("stacked_dynamics_residual: U dimension mismatch");

  TrajectoryView traj = make_view(prob, X, U);
  VectorXd D(prob.nbar());
  for (int k = 0; k < S; ++k) {
    const VectorXd u = traj.joint_control(k);
    D.segment(static_cast<long>(k) * n, n) =
        traj.state(k + 1) - dynamics_step(prob.dynamics, traj.state(k), u);
  }
  return D;
}

/// Player nu's cost on a full candidate trajectory.
inline double game_cost(const GameProblem& prob, int nu, const VectorXd& X,
                        const std::vector<VectorXd>& U) {
  return cost_eval(prob.costs[static_cast<size_t>(nu)], X, U[static_cast<size_t>(nu)]);
}

}  // namespace trajgames

#endif  // TRAJGAMES_PROBLEM_HPP
