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

#ifndef TRAJGAMES_MPC_HPP
#define TRAJGAMES_MPC_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "trajgames/scenarios.hpp"
#include "trajgames/solver.hpp"

namespace trajgames {

struct MpcConfig {
  double sim_duration = 3.0;
  int horizon_steps = 40;        // N of each receding-horizon solve
  double horizon_seconds = 3.0;  // T of each receding-horizon solve
  // Per-vehicle-state noise standard deviations (px, py, theta, v), tiled
  // over the players. Empty disables noise.
  Eigen::Vector4d noise_scale{0.01, 0.01, 0.005, 0.01};
  bool warm_start = true;
  bool carry_lambda = false;  // keep lambda across updates (rho still resets)
  std::uint64_t rng_seed = 0;
  double bbox_half_extent = 1e3;  // divergence detector on closed-loop states

  void validate() const {
    if (!(sim_duration > 0.0))
      throw std::invalid_argument("MpcConfig: sim_duration must be > 0");
    if (horizon_steps < 2 || !(horizon_seconds > 0.0))
      throw std::invalid_argument("MpcConfig: bad replan horizon");
    if ((noise_scale.array() < 0.0).any())
      throw std::invalid_argument("MpcConfig: noise_scale must be >= 0");
  }
};

struct MpcUpdateRecord {
  double t = 0.0;
  SolveStatus status = SolveStatus::Converged;
  int newton_iters = 0;
  int outer_iters = 0;
  bool used_fallback = false;  // executed a shifted previous plan
};

struct MpcTrace {
  double dt = 0.0;
  std::vector<double> times;              // stamps of executed_states
  std::vector<VectorXd> executed_states;  // closed-loop joint states
  std::vector<double> update_durations;   // solve wall-clock seconds
  std::vector<MpcUpdateRecord> updates;
  std::vector<PrimalDual> plans;  // per-update plans (kept for analysis)
  int failures = 0;
  bool diverged = false;

  int update_count() const { return static_cast<int>(updates.size()); }
  double mean_update_duration() const {
    if (update_durations.empty()) return 0.0;
    double s = 0.0;
    for (double d : update_durations) s += d;
    return s / static_cast<double>(update_durations.size());
  }
  /// Wall-clock re-plan frequency the loop would sustain.
  double mean_update_hz() const {
    const double mean = mean_update_duration();
    return mean > 0.0 ? 1.0 / mean : 0.0;
  }
};

/// Shifts a solved horizon one stage forward: controls and dynamics
/// multipliers drop their first stage and duplicate the last one; the state
/// trajectory is re-rolled from the next problem's measured initial state.
inline PrimalDual warm_start_shift(const PrimalDual& prev, const GameProblem& prob_next) {
  PrimalDual next = prev;
  const int S = prob_next.stages();
  for (int nu = 0; nu < prob_next.M; ++nu) {
    const int mv = prob_next.m_nu(nu);
    VectorXd& U = next.U[static_cast<size_t>(nu)];
    VectorXd& mu = next.mu[static_cast<size_t>(nu)];
    U.segment(0, static_cast<long>(S - 1) * mv) =
        prev.U[static_cast<size_t>(nu)].segment(mv, static_cast<long>(S - 1) * mv);
    U.segment(static_cast<long>(S - 1) * mv, mv) =
        prev.U[static_cast<size_t>(nu)].segment(static_cast<long>(S - 1) * mv, mv);
    const int n = prob_next.n();
    mu.segment(0, static_cast<long>(S - 1) * n) =
        prev.mu[static_cast<size_t>(nu)].segment(n, static_cast<long>(S - 1) * n);
    mu.segment(static_cast<long>(S - 1) * n, n) =
        prev.mu[static_cast<size_t>(nu)].segment(static_cast<long>(S - 1) * n, n);
  }
  next.X = rollout_states(prob_next, next.U);
  return next;
}

namespace detail {

/// Straight constant-speed script used for the mis-specified pedestrian.
struct PedestrianScript {
  int player = -1;
  Vector4d start = Vector4d::Zero();
  double v_true = 0.0;

  Vector4d state_at(double t) const {
    Vector4d s = start;
    s[0] += v_true * t * std::cos(start[2]);
    s[1] += v_true * t * std::sin(start[2]);
    s[3] = v_true;
    return s;
  }
};

inline MpcTrace mpc_loop(const ScenarioSpec& spec, const MpcConfig& cfg,
                         const SolverOptions& opts,
                         const PedestrianScript* script) {
  cfg.validate();
  ScenarioSpec horizon_spec = spec;
  horizon_spec.steps = cfg.horizon_steps;
  horizon_spec.horizon_seconds = cfg.horizon_seconds;
  const GameProblem prob = build_scenario(horizon_spec);
  const int n = prob.n();
  const double dt = horizon_spec.dt();
  const int n_updates = static_cast<int>(std::llround(cfg.sim_duration / dt));

  std::mt19937_64 rng(cfg.rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  MpcTrace trace;
  trace.dt = dt;
  VectorXd x = prob.x0;
  trace.times.push_back(0.0);
  trace.executed_states.push_back(x);

  PrimalDual plan = PrimalDual::zero(prob);
  bool have_plan = false;
  VectorXd last_lambda;

  for (int i = 0; i < n_updates; ++i) {
    const double t_now = i * dt;
    const GameProblem prob_i = (i == 0) ? prob : prob.with_initial_state(x);

    PrimalDual y0 = (cfg.warm_start && have_plan) ? warm_start_shift(plan, prob_i)
                                                  : initial_rollout(prob_i);
    ALState al0 = ALState::fresh(prob_i.constraints, opts.rho0, opts.gamma, opts.rho_max);
    if (cfg.carry_lambda && last_lambda.size() == al0.lambda.size()) {
      // Fresh rho per update; lambda optionally carried over.
      al0.lambda = last_lambda;
    }

    SolveResult res = solve_with_state(prob_i, std::move(y0), std::move(al0), opts);
    trace.update_durations.push_back(res.report.wall_time);

    MpcUpdateRecord rec;
    rec.t = t_now;
    rec.status = res.report.status;
    rec.newton_iters = res.report.newton_iters;
    rec.outer_iters = res.report.outer_iters;

    if (res.report.status == SolveStatus::Converged || !have_plan) {
      plan = std::move(res.y);
    } else {
      // Keep flying the previous plan, shifted to the current state.
      plan = warm_start_shift(plan, prob_i);
      rec.used_fallback = true;
      ++trace.failures;
    }
    last_lambda = res.al.lambda;
    have_plan = true;
    trace.updates.push_back(rec);
    trace.plans.push_back(plan);

    // Execute the first control of every player, then propagate the true
    // dynamics with additive Gaussian state noise.
    VectorXd u(prob.m());
    int off = 0;
    for (int nu = 0; nu < prob.M; ++nu) {
      const int mv = prob.m_nu(nu);
      u.segment(off, mv) = plan.U[static_cast<size_t>(nu)].segment(0, mv);
      off += mv;
    }
    x = dynamics_step(prob.dynamics, x, u);
    for (int j = 0; j < n; ++j) x[j] += cfg.noise_scale[j % 4] * gauss(rng);
    if (script) {
      x.segment<4>(4 * script->player) = script->state_at((i + 1) * dt);
    }
    trace.times.push_back((i + 1) * dt);
    trace.executed_states.push_back(x);

    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > cfg.bbox_half_extent) {
      trace.diverged = true;
      break;
    }
  }
  return trace;
}

}  // namespace detail

/// Receding-horizon simulation: re-solve, execute the first control of each
/// player, propagate noisy dynamics, warm-start the next solve. The
/// simulated clock advances dt per executed control regardless of solve wall
/// time.
inline MpcTrace mpc_run(const ScenarioSpec& spec, const MpcConfig& cfg,
                        const SolverOptions& opts) {
  return detail::mpc_loop(spec, cfg, opts, nullptr);
}

/// Pedestrian model-mismatch experiment: the game model assumes the
/// pedestrian tracks its desired speed, while the simulator moves it in a
/// straight line at its true speed.
inline MpcTrace mis_specification_run(const ScenarioSpec& spec, const MpcConfig& cfg,
                                      const SolverOptions& opts) {
  if (!spec.pedestrian)
    throw std::invalid_argument("mis_specification_run: scenario has no pedestrian");
  detail::PedestrianScript script;
  script.player = spec.pedestrian->player;
  script.start = spec.players[static_cast<size_t>(script.player)].start;
  script.v_true = spec.pedestrian->v_true;
  script.start[3] = script.v_true;
  return detail::mpc_loop(spec, cfg, opts, &script);
}

/// Lowest speed the given player reaches along the executed trajectory.
inline double min_speed(const MpcTrace& trace, int player) {
  double v = std::numeric_limits<double>::infinity();
  for (const VectorXd& x : trace.executed_states)
    v = std::min(v, x[4 * player + 3]);
  return v;
}

}  // namespace trajgames

#endif  // TRAJGAMES_MPC_HPP
