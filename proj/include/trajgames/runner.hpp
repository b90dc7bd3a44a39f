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

#ifndef TRAJGAMES_RUNNER_HPP
#define TRAJGAMES_RUNNER_HPP

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trajgames/eval.hpp"
#include "trajgames/io.hpp"
#include "trajgames/mpc.hpp"
#include "trajgames/scenario_io.hpp"
#include "trajgames/solver.hpp"

namespace trajgames {

enum class Command { Solve, Mpc, MonteCarlo, Bench, NashCheck };

inline std::optional<Command> parse_command(const std::string& s) {
  if (s == "solve") return Command::Solve;
  if (s == "mpc") return Command::Mpc;
  if (s == "montecarlo") return Command::MonteCarlo;
  if (s == "bench") return Command::Bench;
  if (s == "nashcheck") return Command::NashCheck;
  return std::nullopt;
}

struct RunConfig {
  Command command = Command::Solve;
  std::string scenario_path;
  std::string output_dir = "out";
  std::vector<std::pair<std::string, std::string>> overrides;  // --set key=value
  std::uint64_t seed = 0;
  int n = 0;  // samples (montecarlo), repetitions (bench), directions (nashcheck)
  bool plot = false;
};

// Exit codes: 0 converged/success, 1 usage or IO error, 2 solver
// non-convergence.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNotConverged = 2;

namespace detail {

struct RunParams {
  SolverOptions solver;
  MpcConfig mpc;
  PerturbationSpec pert;
  int nash_directions = 100;
  double nash_eps = 1e-6;
  std::vector<double> nash_steps{1e-3, 1e-2};
};

inline bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

/// Applies one key=value override; unknown keys are an error, not ignored.
inline void apply_override(RunParams& p, const std::string& key, const std::string& value) {
  auto d = [&] { return std::stod(value); };
  auto i = [&] { return std::stoi(value); };
  SolverOptions& s = p.solver;
  MpcConfig& m = p.mpc;
  if (key == "beta") s.beta = d();
  else if (key == "tau") s.tau = d();
  else if (key == "alpha_min") s.alpha_min = d();
  else if (key == "tol_opt") s.tol_opt = d();
  else if (key == "tol_feas") s.tol_feas = d();
  else if (key == "rho0") s.rho0 = d();
  else if (key == "gamma") s.gamma = d();
  else if (key == "rho_max") s.rho_max = d();
  else if (key == "max_newton") s.max_newton = i();
  else if (key == "max_outer") s.max_outer = i();
  else if (key == "eps_reg") s.eps_reg = d();
  else if (key == "use_structured_solve") s.use_structured_solve = parse_bool(value);
  else if (key == "stall_rel_decrease") s.stall_rel_decrease = d();
  else if (key == "sim_duration") m.sim_duration = d();
  else if (key == "horizon_steps") m.horizon_steps = i();
  else if (key == "horizon_seconds") m.horizon_seconds = d();
  else if (key == "noise_px") m.noise_scale[0] = d();
  else if (key == "noise_py") m.noise_scale[1] = d();
  else if (key == "noise_theta") m.noise_scale[2] = d();
  else if (key == "noise_v") m.noise_scale[3] = d();
  else if (key == "warm_start") m.warm_start = parse_bool(value);
  else if (key == "carry_lambda") m.carry_lambda = parse_bool(value);
  else if (key == "position_delta") p.pert.position_delta = d();
  else if (key == "velocity_frac") p.pert.velocity_frac = d();
  else if (key == "heading_delta") p.pert.heading_delta = d();
  else if (key == "nash_eps") p.nash_eps = d();
  else throw std::invalid_argument("unknown override key '" + key + "'");
}

inline nlohmann::ordered_json batch_summary_json(const ScenarioSpec& spec,
                                                 const BatchStats& stats,
                                                 std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["scenario"] = to_string(spec.kind);
  j["players"] = spec.player_count();
  j["seed"] = seed;
  j["n_samples"] = stats.n_samples;
  j["convergence_rate"] = stats.convergence_rate;
  j["newton_iter_histogram"] = stats.newton_iter_histogram;
  j["violation_histogram"] = stats.violation_histogram;
  j["failure_indices"] = stats.failure_indices;
  j["within_16_newton_fraction"] = stats.fraction_converged_within(16);
  nlohmann::ordered_json statuses = nlohmann::ordered_json::array();
  for (const SampleRecord& r : stats.records) statuses.push_back(to_string(r.status));
  j["statuses"] = statuses;
  // Wall-clock timing lives in samples.csv; keeping it out of the summary
  // makes repeated seeded runs byte-identical.
  return j;
}

}  // namespace detail

/// Executes one CLI workflow. Prints a one-line summary on stdout; detailed
/// machine-readable outputs go to config.output_dir.
inline int run(const RunConfig& config) {
  namespace fs = std::filesystem;
  try {
    detail::RunParams params;
    params.pert.rng_seed = config.seed;
    params.mpc.rng_seed = config.seed;
    for (const auto& [k, v] : config.overrides) detail::apply_override(params, k, v);
    params.solver.validate();

    const fs::path out_dir(config.output_dir);

    auto load_spec = [&]() -> ScenarioSpec {
      if (config.scenario_path.empty())
        throw std::invalid_argument("this command requires --scenario PATH");
      return load_scenario(config.scenario_path);
    };

    switch (config.command) {
      case Command::Solve: {
        const ScenarioSpec spec = load_spec();
        const GameProblem prob = build_scenario(spec);
        const SolveResult res = solve(prob, std::nullopt, params.solver);
        atomic_write_file(out_dir / "trajectory.csv",
                          trajectory_csv(prob, res.y, spec.dt()));
        if (config.plot)
          atomic_write_file(out_dir / "trajectory.svg",
                            trajectory_svg(spec, prob, res.y));
        std::cout << "solve status=" << to_string(res.report.status)
                  << " time_s=" << res.report.wall_time
                  << " violation=" << res.report.final_violation
                  << " gnorm=" << res.report.final_gnorm
                  << " newton=" << res.report.newton_iters
                  << " outer=" << res.report.outer_iters << "\n";
        return res.report.status == SolveStatus::Converged ? kExitOk
                                                           : kExitNotConverged;
      }

      case Command::Mpc: {
        const ScenarioSpec spec = load_spec();
        const bool scripted =
            spec.pedestrian && spec.pedestrian->v_true != spec.pedestrian->v_desired;
        const MpcTrace trace = scripted
                                   ? mis_specification_run(spec, params.mpc, params.solver)
                                   : mpc_run(spec, params.mpc, params.solver);
        atomic_write_file(out_dir / "mpc_trace.csv",
                          mpc_trace_csv(trace, spec.player_count()));
        if (config.plot)
          atomic_write_file(out_dir / "mpc.svg",
                            mpc_svg(spec, trace, spec.player_count()));
        double worst_pair = 0.0;
        for (const VectorXd& x : trace.executed_states)
          for (int a = 0; a < spec.player_count(); ++a)
            for (int b = a + 1; b < spec.player_count(); ++b)
              worst_pair = std::max(
                  worst_pair, collision_constraint(x.segment<2>(4 * a),
                                                   x.segment<2>(4 * b), spec.radius));
        std::cout << "mpc updates=" << trace.update_count()
                  << " failures=" << trace.failures
                  << " mean_update_hz=" << trace.mean_update_hz()
                  << " worst_pair_value=" << worst_pair
                  << " diverged=" << (trace.diverged ? 1 : 0) << "\n";
        return (!trace.diverged && trace.failures == 0) ? kExitOk : kExitNotConverged;
      }

      case Command::MonteCarlo: {
        const ScenarioSpec spec = load_spec();
        const int n = config.n > 0 ? config.n : 100;
        const BatchStats stats = monte_carlo(spec, params.pert, n, params.solver);
        atomic_write_file(out_dir / "samples.csv", samples_csv(stats));
        atomic_write_file(
            out_dir / "summary.json",
            detail::batch_summary_json(spec, stats, config.seed).dump(2) + "\n");
        if (config.plot)
          atomic_write_file(out_dir / "histograms.svg", batch_histogram_svg(stats));
        const auto labels = failure_taxonomy(stats, params.solver.tol_feas);
        std::cout << "montecarlo n=" << stats.n_samples
                  << " convergence_rate=" << stats.convergence_rate
                  << " within16=" << stats.fraction_converged_within(16)
                  << " failures=" << labels.size() << "\n";
        return kExitOk;
      }

      case Command::Bench: {
        const int reps = config.n > 0 ? config.n : 10;
        const auto rows =
            timing_benchmark({ScenarioKind::RampMerge, ScenarioKind::Intersection},
                             {2, 3, 4}, reps, params.solver);
        atomic_write_file(out_dir / "bench.csv", bench_csv(rows));
        for (const BenchRow& r : rows)
          std::cout << "bench " << r.scenario << " M=" << r.players
                    << " mean_ms=" << r.mean_ms << " std_ms=" << r.std_ms
                    << " failures=" << r.failures << "\n";
        return kExitOk;
      }

      case Command::NashCheck: {
        const ScenarioSpec spec = load_spec();
        const GameProblem prob = build_scenario(spec);
        const SolveResult res = solve(prob, std::nullopt, params.solver);
        if (res.report.status != SolveStatus::Converged) {
          std::cout << "nashcheck status=" << to_string(res.report.status)
                    << " (solve did not converge)\n";
          return kExitNotConverged;
        }
        const int dirs = config.n > 0 ? config.n : params.nash_directions;
        const NashCheckReport rep =
            nash_check(prob, res.y, res.al, dirs, params.nash_steps, params.nash_eps,
                       params.solver.tol_feas, config.seed);
        nlohmann::ordered_json j;
        j["directions"] = dirs;
        j["eps"] = params.nash_eps;
        j["players"] = nlohmann::ordered_json::array();
        for (const PlayerNashReport& p : rep.players) {
          j["players"].push_back({{"player", p.player},
                                  {"tested", p.tested},
                                  {"feasible", p.feasible},
                                  {"improving", p.improving},
                                  {"best_improvement", p.best_improvement},
                                  {"gradient_norm1", p.gradient_norm1}});
        }
        atomic_write_file(out_dir / "nash_report.json", j.dump(2) + "\n");
        std::cout << "nashcheck improving=" << rep.total_improving()
                  << " directions=" << dirs << "\n";
        return rep.total_improving() == 0 ? kExitOk : kExitNotConverged;
      }
    }
    return kExitUsage;
  } catch (const ScenarioSchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace trajgames

#endif  // TRAJGAMES_RUNNER_HPP
