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

#ifndef TRAJGAMES_DYNAMICS_HPP
#define TRAJGAMES_DYNAMICS_HPP

#include <Eigen/Dense>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace trajgames {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class IntegratorKind { ExplicitEuler, RK4 };

/// Continuous-time right-hand side xdot = g(x, u) for the joint system.
using RhsFn = std::function<VectorXd(const VectorXd& x, const VectorXd& u)>;

/// Jacobians of the continuous right-hand side: (d g / d x, d g / d u).
using RhsJacFn =
    std::function<std::pair<MatrixXd, MatrixXd>(const VectorXd& x, const VectorXd& u)>;

/// Joint dynamics of all players, discretized with a fixed-step integrator.
/// Immutable after construction; the callables must be pure so that shared
/// instances can be evaluated from concurrent solves.
struct JointDynamics {
  int n = 0;                      // state dimension
  std::vector<int> m_per_player;  // control dimension per player
  double dt = 0.0;
  RhsFn continuous_rhs;
  RhsJacFn continuous_jac;  // analytic; required for Jacobian assembly
  IntegratorKind integrator_kind = IntegratorKind::RK4;

  JointDynamics() = default;
  JointDynamics(int n_, std::vector<int> m_per_player_, double dt_, RhsFn rhs,
                RhsJacFn jac, IntegratorKind kind = IntegratorKind::RK4)
      : n(n_),
        m_per_player(std::move(m_per_player_)),
        dt(dt_),
        continuous_rhs(std::move(rhs)),
        continuous_jac(std::move(jac)),
        integrator_kind(kind) {
    if (n < 1) throw std::invalid_argument("JointDynamics: n must be >= 1");
    if (m_per_player.empty())
      throw std::invalid_argument("JointDynamics: need at least one player");
    for (int mi : m_per_player)
      if (mi < 1) throw std::invalid_argument("JointDynamics: every m^nu must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("JointDynamics: dt must be > 0");
  }

  int num_players() const { return static_cast<int>(m_per_player.size()); }
  int m_total() const {
    return std::accumulate(m_per_player.begin(), m_per_player.end(), 0);
  }
  /// Column offset of player nu inside the joint control vector.
  int control_offset(int nu) const {
    return std::accumulate(m_per_player.begin(), m_per_player.begin() + nu, 0);
  }
};

namespace detail {
inline void check_step_dims(const JointDynamics& dyn, const VectorXd& x,
                            const VectorXd& u) {
  if (x.size() != dyn.n)
    throw std::invalid_argument("dynamics: state dimension mismatch");
  if (u.size() != dyn.m_total())
    throw std::invalid_argument("dynamics: control dimension mismatch");
}
}  // namespace detail

/// One discrete step x_{k+1} = f(x_k, u_k) under the configured integrator.
inline VectorXd dynamics_step(const JointDynamics& dyn, const VectorXd& x,
                              const VectorXd& u) {
  detail::check_step_dims(dyn, x, u);
  const double dt = dyn.dt;
  if (dyn.integrator_kind == IntegratorKind::ExplicitEuler) {
    return x + dt * dyn.continuous_rhs(x, u);
  }
  const VectorXd k1 = dyn.continuous_rhs(x, u);
  const VectorXd k2 = dyn.continuous_rhs(x + 0.5 * dt * k1, u);
  const VectorXd k3 = dyn.continuous_rhs(x + 0.5 * dt * k2, u);
  const VectorXd k4 = dyn.continuous_rhs(x + dt * k3, u);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Jacobians (A, B) of the discrete step, A = d x_{k+1} / d x_k and
/// B = d x_{k+1} / d u_k. B is partitioned column-wise per player.
inline std::pair<MatrixXd, MatrixXd> dynamics_jacobians(const JointDynamics& dyn,
                                                        const VectorXd& x,
                                                        const VectorXd& u) {
  detail::check_step_dims(dyn, x, u);
  const int n = dyn.n;
  const int m = dyn.m_total();
  const double dt = dyn.dt;

  if (dyn.integrator_kind == IntegratorKind::ExplicitEuler) {
    auto [gx, gu] = dyn.continuous_jac(x, u);
    MatrixXd A = MatrixXd::Identity(n, n) + dt * gx;
    MatrixXd B = dt * gu;
    return {std::move(A), std::move(B)};
  }

  // Classical RK4, differentiated stage by stage via the chain rule.
  const VectorXd k1 = dyn.continuous_rhs(x, u);
  const VectorXd x2 = x + 0.5 * dt * k1;
  const VectorXd k2 = dyn.continuous_rhs(x2, u);
  const VectorXd x3 = x + 0.5 * dt * k2;
  const VectorXd k3 = dyn.continuous_rhs(x3, u);
  const VectorXd x4 = x + dt * k3;

  auto [g1x, g1u] = dyn.continuous_jac(x, u);
  auto [g2x, g2u] = dyn.continuous_jac(x2, u);
  auto [g3x, g3u] = dyn.continuous_jac(x3, u);
  auto [g4x, g4u] = dyn.continuous_jac(x4, u);

  const MatrixXd I = MatrixXd::Identity(n, n);
  MatrixXd dk1x = g1x;
  MatrixXd dk2x = g2x * (I + 0.5 * dt * dk1x);
  MatrixXd dk3x = g3x * (I + 0.5 * dt * dk2x);
  MatrixXd dk4x = g4x * (I + dt * dk3x);
  MatrixXd A = I + (dt / 6.0) * (dk1x + 2.0 * dk2x + 2.0 * dk3x + dk4x);

  MatrixXd dk1u = g1u;
  MatrixXd dk2u = g2u + g2x * (0.5 * dt * dk1u);
  MatrixXd dk3u = g3u + g3x * (0.5 * dt * dk2u);
  MatrixXd dk4u = g4u + g4x * (dt * dk3u);
  MatrixXd B = (dt / 6.0) * (dk1u + 2.0 * dk2u + 2.0 * dk3u + dk4u);
  (void)m;
  return {std::move(A), std::move(B)};
}

/// Continuous-time linear dynamics xdot = Ac x + Bc u + c.
inline JointDynamics make_linear_dynamics(const MatrixXd& Ac, const MatrixXd& Bc,
                                          std::vector<int> m_per_player, double dt,
                                          IntegratorKind kind = IntegratorKind::RK4,
                                          const VectorXd& drift = VectorXd()) {
  const int n = static_cast<int>(Ac.rows());
  VectorXd c = drift.size() ? drift : VectorXd::Zero(n);
  auto rhs = [Ac, Bc, c](const VectorXd& x, const VectorXd& u) -> VectorXd {
    return Ac * x + Bc * u + c;
  };
  auto jac = [Ac, Bc](const VectorXd&, const VectorXd&) {
    return std::make_pair(Ac, Bc);
  };
  return JointDynamics(n, std::move(m_per_player), dt, rhs, jac, kind);
}

}  // namespace trajgames

#endif  // TRAJGAMES_DYNAMICS_HPP
