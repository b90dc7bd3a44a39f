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

#ifndef TRAJGAMES_SCENARIOS_HPP
#define TRAJGAMES_SCENARIOS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "trajgames/problem.hpp"

namespace trajgames {

using Eigen::Vector2d;
using Eigen::Vector4d;

// Unicycle state block per player: (px, py, theta, v); controls (omega, a).
inline constexpr int kUnicycleStateDim = 4;
inline constexpr int kUnicycleControlDim = 2;

struct UnicycleState {
  double px = 0.0;
  double py = 0.0;
  double theta = 0.0;
  double v = 0.0;

  Vector4d vec() const { return Vector4d(px, py, theta, v); }
  static UnicycleState from(const Eigen::Ref<const VectorXd>& x) {
    return {x[0], x[1], x[2], x[3]};
  }
};

/// Continuous unicycle model: (px', py', theta', v') =
/// (v cos theta, v sin theta, omega, a).
inline Vector4d unicycle_rhs(const UnicycleState& s, const Vector2d& control) {
  return Vector4d(s.v * std::cos(s.theta), s.v * std::sin(s.theta), control[0],
                  control[1]);
}

/// Joint dynamics of M independent unicycles (n = 4M, m^nu = 2).
inline JointDynamics make_unicycle_dynamics(int M, double dt,
                                            IntegratorKind kind = IntegratorKind::RK4) {
  const int n = kUnicycleStateDim * M;
  auto rhs = [M](const VectorXd& x, const VectorXd& u) -> VectorXd {
    VectorXd dx(x.size());
    for (int nu = 0; nu < M; ++nu) {
      const int xs = kUnicycleStateDim * nu;
      const int us = kUnicycleControlDim * nu;
      const double theta = x[xs + 2];
      const double v = x[xs + 3];
      dx[xs + 0] = v * std::cos(theta);
      dx[xs + 1] = v * std::sin(theta);
      dx[xs + 2] = u[us + 0];
      dx[xs + 3] = u[us + 1];
    }
    return dx;
  };
  auto jac = [M, n](const VectorXd& x, const VectorXd&) {
    MatrixXd gx = MatrixXd::Zero(n, n);
    MatrixXd gu = MatrixXd::Zero(n, kUnicycleControlDim * M);
    for (int nu = 0; nu < M; ++nu) {
      const int xs = kUnicycleStateDim * nu;
      const int us = kUnicycleControlDim * nu;
      const double theta = x[xs + 2];
      const double v = x[xs + 3];
      gx(xs + 0, xs + 2) = -v * std::sin(theta);
      gx(xs + 0, xs + 3) = std::cos(theta);
      gx(xs + 1, xs + 2) = v * std::cos(theta);
      gx(xs + 1, xs + 3) = std::sin(theta);
      gu(xs + 2, us + 0) = 1.0;
      gu(xs + 3, us + 1) = 1.0;
    }
    return std::make_pair(std::move(gx), std::move(gu));
  };
  return JointDynamics(n, std::vector<int>(static_cast<size_t>(M), kUnicycleControlDim),
                       dt, rhs, jac, kind);
}

using Polyline = std::vector<Vector2d>;

/// Roadway description: boundary polylines vehicles must keep clear of, and
/// optional lane centerlines (metadata for scenario construction/plots).
struct RoadGeometry {
  std::vector<Polyline> boundaries;
  std::vector<Polyline> lanes;
};

/// Pairwise collision value r^2 - ||p1 - p2||^2; <= 0 means safe.
inline double collision_constraint(const Vector2d& p1, const Vector2d& p2, double r) {
  return r * r - (p1 - p2).squaredNorm();
}

/// Closest point on a polyline, ties broken by the lowest segment index.
/// A single-point polyline degenerates to that point.
inline Vector2d closest_point_on_polyline(const Vector2d& p, const Polyline& poly) {
  if (poly.empty())
    throw std::invalid_argument("closest_point_on_polyline: empty polyline");
  if (poly.size() == 1) return poly[0];
  Vector2d best = poly[0];
  double best_d2 = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < poly.size(); ++i) {
    const Vector2d a = poly[i];
    const Vector2d ab = poly[i + 1] - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vector2d q = a + t * ab;
    const double d2 = (p - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = q;
    }
  }
  return best;
}

/// Road-boundary clearance value r^2 - ||p - q||^2 with q the closest
/// boundary point; <= 0 means the vehicle keeps its radius off the boundary.
inline double boundary_constraint(const Vector2d& p, const Polyline& boundary,
                                  double r) {
  const Vector2d q = closest_point_on_polyline(p, boundary);
  return r * r - (p - q).squaredNorm();
}

enum class ScenarioKind { RampMerge, Intersection };

inline const char* to_string(ScenarioKind k) {
  return k == ScenarioKind::RampMerge ? "ramp_merge" : "intersection";
}

struct PlayerSpec {
  Vector4d start = Vector4d::Zero();
  Vector4d goal = Vector4d::Zero();
  Vector4d q_diag = Vector4d::Zero();
  Vector4d qf_diag = Vector4d::Zero();
  Vector2d r_diag = Vector2d::Ones();
};

/// Pedestrian used by the model-mismatch experiment: the ego's game model
/// assumes the pedestrian wants speed v_desired, while the simulator moves it
/// in a straight line at v_true.
struct PedestrianSpec {
  int player = -1;
  double v_desired = 0.0;
  double v_true = 0.0;
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::RampMerge;
  double radius = 1.0;
  double horizon_seconds = 5.0;
  int steps = 40;  // N
  IntegratorKind integrator = IntegratorKind::RK4;
  std::vector<PlayerSpec> players;
  RoadGeometry road;
  std::optional<PedestrianSpec> pedestrian;
  // Pin every player's final position to its goal with equality constraints.
  bool pin_goals = false;

  int player_count() const { return static_cast<int>(players.size()); }
  double dt() const { return horizon_seconds / steps; }
};

/// Assembles the full game: joint unicycle dynamics, per-player quadratic
/// goal-tracking costs, and collision plus road-boundary inequality
/// constraints at every decision state.
inline GameProblem build_scenario(const ScenarioSpec& spec) {
  const int M = spec.player_count();
  if (M < 1) throw std::invalid_argument("build_scenario: no players");
  const int n = kUnicycleStateDim * M;

  for (int a = 0; a < M; ++a)
    for (int b = a + 1; b < M; ++b) {
      const Vector2d pa = spec.players[static_cast<size_t>(a)].start.head<2>();
      const Vector2d pb = spec.players[static_cast<size_t>(b)].start.head<2>();
      if ((pa - pb).norm() <= spec.radius) {
        std::ostringstream msg;
        msg << "build_scenario: players " << a << " and " << b
            << " start within the collision radius";
        throw std::invalid_argument(msg.str());
      }
    }

  JointDynamics dyn = make_unicycle_dynamics(M, spec.dt(), spec.integrator);

  std::vector<PlayerCost> costs;
  costs.reserve(static_cast<size_t>(M));
  // Goal state stacks every player's goal; each player only weights its own
  // block.
  VectorXd x_goal(n);
  for (int nu = 0; nu < M; ++nu)
    x_goal.segment<4>(4 * nu) = spec.players[static_cast<size_t>(nu)].goal;
  for (int nu = 0; nu < M; ++nu) {
    const PlayerSpec& p = spec.players[static_cast<size_t>(nu)];
    MatrixXd Q = MatrixXd::Zero(n, n);
    MatrixXd Qf = MatrixXd::Zero(n, n);
    Q.block<4, 4>(4 * nu, 4 * nu) = p.q_diag.asDiagonal();
    Qf.block<4, 4>(4 * nu, 4 * nu) = p.qf_diag.asDiagonal();
    costs.emplace_back(Q, MatrixXd(p.r_diag.asDiagonal()), Qf, x_goal);
  }

  ConstraintSet set;
  const double r = spec.radius;
  const int S = spec.steps - 1;
  for (int t = 1; t <= S; ++t) {
    for (int a = 0; a < M; ++a)
      for (int b = a + 1; b < M; ++b) {
        ScalarConstraint c;
        {
          std::ostringstream lbl;
          lbl << "collision[p" << a << ",p" << b << "]@" << t;
          c.label = lbl.str();
        }
        c.state_times = {t};
        c.value = [a, b, r, t](const TrajectoryView& traj) {
          const auto x = traj.state(t);
          return collision_constraint(x.segment<2>(4 * a), x.segment<2>(4 * b), r);
        };
        c.gradient = [a, b, t, n](const TrajectoryView& traj, ConstraintGradient& out) {
          const auto x = traj.state(t);
          const Vector2d d = x.segment<2>(4 * a) - x.segment<2>(4 * b);
          VectorXd g = VectorXd::Zero(n);
          g.segment<2>(4 * a) = -2.0 * d;
          g.segment<2>(4 * b) = 2.0 * d;
          out.add_state(t, g);
        };
        set.inequality_fns.push_back(std::move(c));
      }
    for (int nu = 0; nu < M; ++nu)
      for (size_t bi = 0; bi < spec.road.boundaries.size(); ++bi) {
        const Polyline& poly = spec.road.boundaries[bi];
        ScalarConstraint c;
        {
          std::ostringstream lbl;
          lbl << "boundary[p" << nu << ",b" << bi << "]@" << t;
          c.label = lbl.str();
        }
        c.state_times = {t};
        c.value = [nu, poly, r, t](const TrajectoryView& traj) {
          return boundary_constraint(traj.state(t).segment<2>(4 * nu), poly, r);
        };
        c.gradient = [nu, poly, t, n](const TrajectoryView& traj,
                                      ConstraintGradient& out) {
          const Vector2d p = traj.state(t).segment<2>(4 * nu);
          const Vector2d q = closest_point_on_polyline(p, poly);
          VectorXd g = VectorXd::Zero(n);
          g.segment<2>(4 * nu) = -2.0 * (p - q);
          out.add_state(t, g);
        };
        set.inequality_fns.push_back(std::move(c));
      }
  }

  if (spec.pin_goals) {
    const int tN = spec.steps - 1;
    for (int nu = 0; nu < M; ++nu)
      for (int axis = 0; axis < 2; ++axis) {
        ScalarConstraint c;
        {
          std::ostringstream lbl;
          lbl << "goal_pin[p" << nu << "," << (axis == 0 ? 'x' : 'y') << "]";
          c.label = lbl.str();
        }
        const double target = spec.players[static_cast<size_t>(nu)].goal[axis];
        c.state_times = {tN};
        c.value = [nu, axis, target, tN](const TrajectoryView& traj) {
          return traj.state(tN)[4 * nu + axis] - target;
        };
        c.gradient = [nu, axis, tN, n](const TrajectoryView&, ConstraintGradient& out) {
          VectorXd g = VectorXd::Zero(n);
          g[4 * nu + axis] = 1.0;
          out.add_state(tN, g);
        };
        set.equality_fns.push_back(std::move(c));
      }
  }

  VectorXd x0(n);
  for (int nu = 0; nu < M; ++nu)
    x0.segment<4>(4 * nu) = spec.players[static_cast<size_t>(nu)].start;

  return GameProblem(spec.steps, std::move(dyn), std::move(costs), std::move(set),
                     std::move(x0));
}

/// Penalty-method objective used as a comparison metric: the player cost plus
/// a quadratic penalty on violated constraints. Unlike the augmented
/// Lagrangian, activation ignores multipliers (inequalities are off whenever
/// C_k < 0).
inline double penalty_objective(const GameProblem& prob, const VectorXd& X,
                                const std::vector<VectorXd>& U, const VectorXd& rho,
                                int nu) {
  const ConstraintSet& set = prob.constraints;
  if (rho.size() != set.n_c())
    throw std::invalid_argument("penalty_objective: rho length mismatch");
  const TrajectoryView traj = make_view(prob, X, U);
  const VectorXd C = evaluate_constraints(set, traj);
  double J = game_cost(prob, nu, X, U);
  for (int j = 0; j < set.n_c(); ++j) {
    const bool off = set.is_inequality(j) && C[j] < 0.0;
    if (!off) J += 0.5 * rho[j] * C[j] * C[j];
  }
  return J;
}

// ---------------------------------------------------------------------------
// Stock scenarios. Geometry and weights are desk-scale defaults; everything
// is overridable through scenario files.
// ---------------------------------------------------------------------------

namespace detail {
// Stage weights are kept small relative to the terminal pull: large running
// state costs inflate the dynamics multipliers and with them the curvature
// terms the quasi-Newton Jacobian drops, which slows convergence.
inline PlayerSpec make_car(double sx, double sy, double sth, double sv, double gx,
                           double gy, double gth, double gv) {
  PlayerSpec p;
  p.start << sx, sy, sth, sv;
  p.goal << gx, gy, gth, gv;
  p.q_diag << 0.005, 0.03, 0.005, 0.01;
  p.qf_diag << 2.0, 2.0, 0.5, 0.5;
  p.r_diag << 0.15, 0.08;
  return p;
}
}  // namespace detail

/// Ramp merge: cars cruising on a straight road while one merges from a ramp
/// that narrows into the main carriageway. The goal spacing is slightly
/// tighter than the collision diameter, so the equilibrium has to negotiate
/// who yields. M in {2, 3, 4}.
inline ScenarioSpec ramp_merge_spec(int M = 3) {
  if (M < 2 || M > 4)
    throw std::invalid_argument("ramp_merge_spec: M must be in {2, 3, 4}");
  ScenarioSpec spec;
  spec.kind = ScenarioKind::RampMerge;
  spec.radius = 1.4;
  spec.horizon_seconds = 5.0;
  spec.steps = 40;
  spec.road.boundaries = {
      {{-40.0, 2.6}, {60.0, 2.6}},
      {{-40.0, -7.0}, {-4.0, -7.0}, {10.0, -2.6}, {60.0, -2.6}},
  };
  spec.road.lanes = {{{-40.0, 0.0}, {60.0, 0.0}}};

  using detail::make_car;
  // The ramp car is aimed at the merge point so that even the zero-control
  // rollout heads toward the lane instead of riding the ramp edge. Goal
  // spacing stays above the collision diameter; the conflict is temporal
  // (the merge happens while the lane traffic passes the gore point).
  PlayerSpec ramp = make_car(-7.5, -4.2, 0.3, 3.4, 8.3, 0.0, 0.0, 3.0);
  if (M == 2) {
    spec.players = {make_car(-8.5, 0.0, 0.0, 3.0, 6.0, 0.0, 0.0, 3.0), ramp};
  } else if (M == 3) {
    spec.players = {make_car(-8.5, 0.0, 0.0, 3.0, 6.0, 0.0, 0.0, 3.0),
                    make_car(-4.0, 0.0, 0.0, 3.0, 10.6, 0.0, 0.0, 3.0), ramp};
  } else {
    spec.players = {make_car(-14.0, 0.0, 0.0, 3.0, 1.5, 0.0, 0.0, 3.0),
                    make_car(-8.5, 0.0, 0.0, 3.0, 6.0, 0.0, 0.0, 3.0),
                    make_car(-4.0, 0.0, 0.0, 3.0, 10.6, 0.0, 0.0, 3.0), ramp};
  }
  return spec;
}

/// Two-way intersection with a crosswalk gap in the road boundaries. With
/// with_pedestrian (M >= 3), the last-but-one slot is a crossing pedestrian;
/// v_true is its actual walking speed (defaults to the desired speed).
inline ScenarioSpec intersection_spec(int M = 2, bool with_pedestrian = false,
                                      double v_true = -1.0) {
  if (M < 2 || M > 4)
    throw std::invalid_argument("intersection_spec: M must be in {2, 3, 4}");
  ScenarioSpec spec;
  spec.kind = ScenarioKind::Intersection;
  spec.radius = 1.0;
  spec.horizon_seconds = 5.0;
  spec.steps = 40;
  spec.road.boundaries = {
      {{-30.0, 2.5}, {-2.0, 2.5}},
      {{2.0, 2.5}, {30.0, 2.5}},
      {{-30.0, -2.5}, {-2.0, -2.5}},
      {{2.0, -2.5}, {30.0, -2.5}},
  };
  spec.road.lanes = {{{-30.0, -1.25}, {30.0, -1.25}}, {{30.0, 1.25}, {-30.0, 1.25}}};

  using detail::make_car;
  const double pi = 3.14159265358979323846;
  spec.players = {make_car(-12.0, -1.25, 0.0, 3.0, 3.0, -1.25, 0.0, 3.0),
                  make_car(12.0, 1.25, pi, 3.0, -3.0, 1.25, pi, 3.0)};
  if (with_pedestrian) {
    const double v_d = 1.2;
    const double v_0 = v_true > 0.0 ? v_true : v_d;
    PlayerSpec ped;
    ped.start << 0.0, -4.0, pi / 2.0, v_0;
    ped.goal << 0.0, 2.0, pi / 2.0, v_d;
    ped.q_diag << 0.2, 0.1, 0.05, 0.5;
    ped.qf_diag << 1.0, 1.0, 0.5, 0.5;
    ped.r_diag << 0.5, 0.5;
    spec.players.push_back(ped);
    PedestrianSpec ps;
    ps.player = static_cast<int>(spec.players.size()) - 1;
    ps.v_desired = v_d;
    ps.v_true = v_0;
    spec.pedestrian = ps;
  }
  double follow_x = -18.0;
  double follow_goal = -3.0;
  while (spec.player_count() < M) {
    spec.players.push_back(make_car(follow_x, -1.25, 0.0, 3.0, follow_goal, -1.25, 0.0, 3.0));
    follow_x -= 6.0;
    follow_goal -= 6.0;
  }
  return spec;
}

/// Two cars whose final positions are pinned (by equality constraints) to the
/// same spot while the collision radius keeps them apart: no feasible point
/// exists, so a solve must end in MaxIterations with a violation plateau.
inline ScenarioSpec infeasible_spec() {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::RampMerge;
  spec.radius = 2.0;
  spec.horizon_seconds = 4.0;
  spec.steps = 20;
  spec.road.boundaries = {{{-30.0, 4.0}, {30.0, 4.0}}, {{-30.0, -4.0}, {30.0, -4.0}}};
  spec.pin_goals = true;
  using detail::make_car;
  PlayerSpec a = make_car(-6.0, -1.2, 0.0, 2.0, 2.0, 0.0, 0.0, 0.0);
  PlayerSpec b = make_car(-6.0, 1.2, 0.0, 2.0, 2.0, 0.0, 0.0, 0.0);
  spec.players = {a, b};
  return spec;
}

}  // namespace trajgames

#endif  // TRAJGAMES_SCENARIOS_HPP
