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

#include <CLI11.hpp>

#include "trajgames/runner.hpp"

namespace {

void add_common(CLI::App* cmd, trajgames::RunConfig& config,
                std::vector<std::string>& sets, bool needs_scenario) {
  if (needs_scenario)
    cmd->add_option("--scenario", config.scenario_path, "Scenario JSON file")
        ->required();
  cmd->add_option("--out", config.output_dir, "Output directory");
  cmd->add_option("--seed", config.seed, "RNG seed (all randomness flows from it)");
  cmd->add_option("--n", config.n, "Sample count / repetitions / directions");
  cmd->add_flag("--plot", config.plot, "Also write SVG plots");
  cmd->add_option("--set", sets, "Override KEY=VALUE (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Augmented-Lagrangian Newton solver for generalized Nash "
               "equilibrium trajectories in constrained dynamic games"};
  app.require_subcommand(1);

  trajgames::RunConfig config;
  std::vector<std::string> sets;

  auto* solve = app.add_subcommand("solve", "Solve a scenario once");
  add_common(solve, config, sets, true);
  auto* mpc = app.add_subcommand("mpc", "Receding-horizon simulation");
  add_common(mpc, config, sets, true);
  auto* mc = app.add_subcommand("montecarlo", "Monte Carlo robustness study");
  add_common(mc, config, sets, true);
  auto* bench = app.add_subcommand("bench", "Timing benchmark over stock scenarios");
  add_common(bench, config, sets, false);
  auto* nash = app.add_subcommand("nashcheck", "Solve then verify Nash deviations");
  add_common(nash, config, sets, true);

  CLI11_PARSE(app, argc, argv);

  if (solve->parsed()) config.command = trajgames::Command::Solve;
  else if (mpc->parsed()) config.command = trajgames::Command::Mpc;
  else if (mc->parsed()) config.command = trajgames::Command::MonteCarlo;
  else if (bench->parsed()) config.command = trajgames::Command::Bench;
  else config.command = trajgames::Command::NashCheck;

  for (const std::string& kv : sets) {
    const size_t pos = kv.find('=');
    if (pos == std::string::npos) {
      std::cerr << "error: --set expects KEY=VALUE, got '" << kv << "'\n";
      return trajgames::kExitUsage;
    }
    config.overrides.emplace_back(kv.substr(0, pos), kv.substr(pos + 1));
  }
  return trajgames::run(config);
}
