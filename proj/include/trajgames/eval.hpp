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

#ifndef TRAJGAMES_EVAL_HPP
#define TRAJGAMES_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "trajgames/mpc.hpp"
#include "trajgames/scenarios.hpp"
#include "trajgames/solver.hpp"

namespace trajgames {

struct PerturbationSpec {
  double position_delta = 1.0;                        // meters, uniform +/-
  double velocity_frac = 0.03;                        // fraction, uniform +/-
  double heading_delta = 2.5 * 3.14159265358979 / 180.0;  // radians, uniform +/-
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (position_delta < 0.0 || velocity_frac < 0.0 || heading_delta < 0.0)
      throw std::invalid_argument("PerturbationSpec: deltas must be >= 0");
  }
};

struct SampleRecord {
  int index = 0;
  SolveStatus status = SolveStatus::MaxIterations;
  double solve_seconds = 0.0;
  int newton_iters = 0;
  int outer_iters = 0;
  double final_violation = 0.0;
  double final_gnorm = 0.0;
  double max_collision_violation = 0.0;
  int resamples = 0;  // rejected draws before a collision-free start
};

// Histogram edges are fixed so that deterministic summaries are byte-stable.
inline constexpr int kNewtonHistBucket = 4;   // bucket width in iterations
inline constexpr int kNewtonHistBuckets = 17;  // [0,4) .. [60,64), 64+
inline constexpr int kViolationHistBuckets = 12;  // decades from <=1e-9 up

inline int newton_hist_bucket(int iters) {
  return std::min(iters / kNewtonHistBucket, kNewtonHistBuckets - 1);
}
inline int violation_hist_bucket(double v) {
  if (v <= 1e-9) return 0;
  const int b = 1 + static_cast<int>(std::floor(std::log10(v) + 9.0));
  return std::clamp(b, 0, kViolationHistBuckets - 1);
}

struct BatchStats {
  int n_samples = 0;
  double convergence_rate = 0.0;
  // Solve-time quantiles in seconds: p50, p90, p95, max.
  double time_p50 = 0.0, time_p90 = 0.0, time_p95 = 0.0, time_max = 0.0;
  std::vector<int> newton_iter_histogram = std::vector<int>(kNewtonHistBuckets, 0);
  std::vector<int> violation_histogram = std::vector<int>(kViolationHistBuckets, 0);
  std::vector<int> failure_indices;
  std::vector<SampleRecord> records;

  double fraction_converged_within(int newton_cap) const {
    int conv = 0, fast = 0;
    for (const SampleRecord& r : records)
      if (r.status == SolveStatus::Converged) {
        ++conv;
        if (r.newton_iters <= newton_cap) ++fast;
      }
    return conv > 0 ? static_cast<double>(fast) / conv : 0.0;
  }
  double fraction_converged_faster_than(double seconds) const {
    int conv = 0, fast = 0;
    for (const SampleRecord& r : records)
      if (r.status == SolveStatus::Converged) {
        ++conv;
        if (r.solve_seconds < seconds) ++fast;
      }
    return conv > 0 ? static_cast<double>(fast) / conv : 0.0;
  }
};

namespace detail {

inline std::mt19937_64 sample_rng(std::uint64_t seed, int index) {
  // Independent per-sample streams so sample order or parallelism cannot
  // change results.
  return std::mt19937_64(seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1));
}

inline double max_collision_violation(const GameProblem& prob, const PrimalDual& y) {
  const TrajectoryView traj = make_view(prob, y.X, y.U);
  double worst = 0.0;
  for (int j = 0; j < prob.constraints.n_c(); ++j)
    if (prob.constraints.label(j).rfind("collision", 0) == 0)
      worst = std::max(worst, prob.constraints.at(j).value(traj));
  return worst;
}

}  // namespace detail

/// Applies one uniform perturbation draw to every player's start state.
inline ScenarioSpec perturb_scenario(const ScenarioSpec& spec, const PerturbationSpec& pert,
                                     std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ScenarioSpec out = spec;
  for (PlayerSpec& p : out.players) {
    p.start[0] += u(rng) * pert.position_delta;
    p.start[1] += u(rng) * pert.position_delta;
    p.start[2] += u(rng) * pert.heading_delta;
    p.start[3] *= 1.0 + u(rng) * pert.velocity_frac;
  }
  return out;
}

inline bool starts_collision_free(const ScenarioSpec& spec) {
  for (size_t a = 0; a < spec.players.size(); ++a)
    for (size_t b = a + 1; b < spec.players.size(); ++b)
      if ((spec.players[a].start.head<2>() - spec.players[b].start.head<2>()).norm() <=
          spec.radius)
        return false;
  return true;
}

/// Monte Carlo robustness study: solve the scenario from n_samples randomly
/// perturbed initial states. Draws violating the collision-free-start
/// invariant are rejected and resampled. Failures are data, not errors.
inline BatchStats monte_carlo(const ScenarioSpec& spec, const PerturbationSpec& pert,
                              int n_samples, const SolverOptions& opts,
                              std::vector<PrimalDual>* solutions_out = nullptr) {
  pert.validate();
  if (n_samples < 1) throw std::invalid_argument("monte_carlo: n_samples must be >= 1");
  BatchStats stats;
  stats.n_samples = n_samples;
  if (solutions_out) solutions_out->clear();

  std::vector<double> times;
  int converged = 0;
  for (int i = 0; i < n_samples; ++i) {
    std::mt19937_64 rng = detail::sample_rng(pert.rng_seed, i);
    ScenarioSpec sp = perturb_scenario(spec, pert, rng);
    int resamples = 0;
    while (!starts_collision_free(sp)) {
      if (++resamples > 1000)
        throw std::runtime_error("monte_carlo: cannot draw a collision-free start");
      sp = perturb_scenario(spec, pert, rng);
    }
    const GameProblem prob = build_scenario(sp);
    SolveResult res = solve(prob, std::nullopt, opts);

    SampleRecord rec;
    rec.index = i;
    rec.status = res.report.status;
    rec.solve_seconds = res.report.wall_time;
    rec.newton_iters = res.report.newton_iters;
    rec.outer_iters = res.report.outer_iters;
    rec.final_violation = res.report.final_violation;
    rec.final_gnorm = res.report.final_gnorm;
    rec.max_collision_violation = detail::max_collision_violation(prob, res.y);
    rec.resamples = resamples;

    if (rec.status == SolveStatus::Converged) ++converged;
    else stats.failure_indices.push_back(i);
    ++stats.newton_iter_histogram[static_cast<size_t>(newton_hist_bucket(rec.newton_iters))];
    ++stats.violation_histogram[static_cast<size_t>(violation_hist_bucket(rec.final_violation))];
    times.push_back(rec.solve_seconds);
    stats.records.push_back(rec);
    if (solutions_out) solutions_out->push_back(std::move(res.y));
  }

  stats.convergence_rate = static_cast<double>(converged) / n_samples;
  std::sort(times.begin(), times.end());
  auto quantile = [&](double q) {
    const size_t idx = static_cast<size_t>(q * (times.size() - 1));
    return times[idx];
  };
  stats.time_p50 = quantile(0.5);
  stats.time_p90 = quantile(0.9);
  stats.time_p95 = quantile(0.95);
  stats.time_max = times.back();
  return stats;
}

struct BenchRow {
  std::string scenario;
  int players = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  int failures = 0;  // non-converged repetitions, excluded from the stats
};

/// Times cold-start solves to the constraint-satisfaction stopping criterion
/// (tol_feas), one warm-up per case, `repetitions` timed runs.
inline std::vector<BenchRow> timing_benchmark(const std::vector<ScenarioKind>& kinds,
                                              const std::vector<int>& player_counts,
                                              int repetitions, const SolverOptions& opts) {
  if (repetitions < 2)
    throw std::invalid_argument("timing_benchmark: repetitions must be >= 2");
  std::vector<BenchRow> rows;
  for (ScenarioKind kind : kinds) {
    for (int M : player_counts) {
      const ScenarioSpec spec = kind == ScenarioKind::RampMerge
                                    ? ramp_merge_spec(M)
                                    : intersection_spec(M, /*with_pedestrian=*/M >= 3);
      const GameProblem prob = build_scenario(spec);
      (void)solve(prob, std::nullopt, opts);  // warm the code path

      std::vector<double> ms;
      BenchRow row;
      row.scenario = to_string(kind);
      row.players = M;
      for (int rep = 0; rep < repetitions; ++rep) {
        SolveResult res = solve(prob, std::nullopt, opts);
        if (res.report.status == SolveStatus::Converged)
          ms.push_back(res.report.wall_time * 1e3);
        else
          ++row.failures;
      }
      if (!ms.empty()) {
        double mean = 0.0;
        for (double v : ms) mean += v;
        mean /= static_cast<double>(ms.size());
        double var = 0.0;
        for (double v : ms) var += (v - mean) * (v - mean);
        var = ms.size() > 1 ? var / static_cast<double>(ms.size() - 1) : 0.0;
        row.mean_ms = mean;
        row.std_ms = std::sqrt(var);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

struct PlayerNashReport {
  int player = 0;
  int tested = 0;      // sampled deviations
  int feasible = 0;    // deviations surviving the constraint filter
  int improving = 0;   // feasible deviations beating the threshold
  double best_improvement = 0.0;  // largest feasible cost decrease found
  double gradient_norm1 = 0.0;    // || G^nu ||_1 at the solution
};

struct NashCheckReport {
  std::vector<PlayerNashReport> players;
  int total_improving() const {
    int s = 0;
    for (const auto& p : players) s += p.improving;
    return s;
  }
};

/// Sampled unilateral-deviation check of a candidate equilibrium. For each
/// player, random control-space directions are applied at the given step
/// sizes, the state is re-rolled through the true dynamics with the other
/// players' controls fixed, infeasible candidates (violation > tol_feas) are
/// discarded, and the player's cost is compared against the solution.
inline NashCheckReport nash_check(const GameProblem& prob, const PrimalDual& solution,
                                  const ALState& al, int n_directions,
                                  const std::vector<double>& step_sizes, double eps,
                                  double tol_feas = 1e-3, std::uint64_t rng_seed = 0) {
  NashCheckReport report;
  // Consistent base point: re-roll the state trajectory from the solved
  // controls (for a converged solution this matches solution.X to within the
  // dynamics tolerance).
  const VectorXd X_base = rollout_states(prob, solution.U);
  std::vector<double> J_base(static_cast<size_t>(prob.M));
  for (int nu = 0; nu < prob.M; ++nu)
    J_base[static_cast<size_t>(nu)] = game_cost(prob, nu, X_base, solution.U);

  for (int nu = 0; nu < prob.M; ++nu) {
    PlayerNashReport pr;
    pr.player = nu;
    pr.gradient_norm1 = player_gradient(prob, solution, al, nu).lpNorm<1>();
    std::mt19937_64 rng = detail::sample_rng(rng_seed, nu);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const long dim = solution.U[static_cast<size_t>(nu)].size();

    for (int d = 0; d < n_directions; ++d) {
      VectorXd dir(dim);
      for (long j = 0; j < dim; ++j) dir[j] = gauss(rng);
      const double norm = dir.norm();
      if (norm == 0.0) continue;
      dir /= norm;
      for (double step : step_sizes) {
        ++pr.tested;
        std::vector<VectorXd> U = solution.U;
        U[static_cast<size_t>(nu)] += step * dir;
        const VectorXd X = rollout_states(prob, U);
        const TrajectoryView traj = make_view(prob, X, U);
        const double viol =
            max_violation(evaluate_constraints(prob.constraints, traj),
                          prob.constraints.n_ci());
        if (viol > tol_feas) continue;
        ++pr.feasible;
        const double J = cost_eval(prob.costs[static_cast<size_t>(nu)], X,
                                   U[static_cast<size_t>(nu)]);
        const double improvement = J_base[static_cast<size_t>(nu)] - J;
        pr.best_improvement = std::max(pr.best_improvement, improvement);
        if (improvement > eps) ++pr.improving;
      }
    }
    report.players.push_back(pr);
  }
  return report;
}

enum class FailureKind { EntangledTrajectories, Stalled, LineSearchFailure, Other };

inline const char* to_string(FailureKind k) {
  switch (k) {
    case FailureKind::EntangledTrajectories: return "EntangledTrajectories";
    case FailureKind::Stalled: return "Stalled";
    case FailureKind::LineSearchFailure: return "LineSearchFailure";
    case FailureKind::Other: return "Other";
  }
  return "Unknown";
}

struct FailureLabel {
  int sample_index = 0;
  FailureKind kind = FailureKind::Other;
  double max_collision_violation = 0.0;
};

/// Classifies the failed samples of a Monte Carlo batch. Overlapping cars at
/// the final iterate (a pairwise collision violated far beyond tolerance)
/// take precedence; otherwise iteration exhaustion counts as a stall.
inline std::vector<FailureLabel> failure_taxonomy(const BatchStats& batch,
                                                  double tol_feas = 1e-3) {
  std::vector<FailureLabel> labels;
  for (int idx : batch.failure_indices) {
    const SampleRecord& rec = batch.records[static_cast<size_t>(idx)];
    FailureLabel lbl;
    lbl.sample_index = idx;
    lbl.max_collision_violation = rec.max_collision_violation;
    if (rec.max_collision_violation > 10.0 * tol_feas)
      lbl.kind = FailureKind::EntangledTrajectories;
    else if (rec.status == SolveStatus::LineSearchFailure)
      lbl.kind = FailureKind::LineSearchFailure;
    else if (rec.status == SolveStatus::MaxIterations)
      lbl.kind = FailureKind::Stalled;
    else
      lbl.kind = FailureKind::Other;
    labels.push_back(lbl);
  }
  return labels;
}

}  // namespace trajgames

#endif  // TRAJGAMES_EVAL_HPP
