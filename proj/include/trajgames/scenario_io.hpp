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

#ifndef TRAJGAMES_SCENARIO_IO_HPP
#define TRAJGAMES_SCENARIO_IO_HPP

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "trajgames/scenarios.hpp"

namespace trajgames {

inline constexpr int kScenarioSchemaVersion = 1;

/// Scenario file violates the schema; the message names the offending field
/// path.
struct ScenarioSchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

using json = nlohmann::ordered_json;

[[noreturn]] inline void schema_fail(const std::string& path, const std::string& what) {
  throw ScenarioSchemaError("scenario schema error at " + path + ": " + what);
}

inline const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) schema_fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) schema_fail(path + "/" + key, "missing required field");
  return *it;
}

inline double require_number(const json& j, const char* key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number()) schema_fail(path + "/" + key, "expected a number");
  return v.get<double>();
}

inline int require_int(const json& j, const char* key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number_integer()) schema_fail(path + "/" + key, "expected an integer");
  return v.get<int>();
}

template <int K>
Eigen::Matrix<double, K, 1> require_vec(const json& j, const char* key,
                                        const std::string& path) {
  const json& v = require(j, key, path);
  const std::string vp = path + "/" + key;
  if (!v.is_array() || v.size() != K)
    schema_fail(vp, "expected an array of " + std::to_string(K) + " numbers");
  Eigen::Matrix<double, K, 1> out;
  for (int i = 0; i < K; ++i) {
    if (!v[static_cast<size_t>(i)].is_number())
      schema_fail(vp + "/" + std::to_string(i), "expected a number");
    out[i] = v[static_cast<size_t>(i)].get<double>();
  }
  return out;
}

inline Polyline parse_polyline(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() < 2)
    schema_fail(path, "expected an array of at least 2 points");
  Polyline poly;
  for (size_t i = 0; i < v.size(); ++i) {
    const json& p = v[i];
    const std::string pp = path + "/" + std::to_string(i);
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      schema_fail(pp, "expected a point [x, y]");
    poly.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return poly;
}

}  // namespace detail

inline ScenarioSpec parse_scenario(const std::string& text) {
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioSchemaError(std::string("scenario file is not valid JSON: ") +
                              e.what());
  }
  const std::string root = "";
  const int version = detail::require_int(j, "schema_version", root);
  if (version != kScenarioSchemaVersion)
    detail::schema_fail("/schema_version",
                        "unsupported version " + std::to_string(version));

  ScenarioSpec spec;
  {
    const json& kind = detail::require(j, "kind", root);
    if (kind == "ramp_merge") spec.kind = ScenarioKind::RampMerge;
    else if (kind == "intersection") spec.kind = ScenarioKind::Intersection;
    else detail::schema_fail("/kind", "expected \"ramp_merge\" or \"intersection\"");
  }
  spec.radius = detail::require_number(j, "radius", root);
  if (!(spec.radius > 0.0)) detail::schema_fail("/radius", "must be > 0");
  spec.horizon_seconds = detail::require_number(j, "horizon_seconds", root);
  if (!(spec.horizon_seconds > 0.0))
    detail::schema_fail("/horizon_seconds", "must be > 0");
  spec.steps = detail::require_int(j, "steps", root);
  if (spec.steps < 2) detail::schema_fail("/steps", "must be >= 2");

  if (j.contains("integrator")) {
    const json& integ = j["integrator"];
    if (integ == "rk4") spec.integrator = IntegratorKind::RK4;
    else if (integ == "euler") spec.integrator = IntegratorKind::ExplicitEuler;
    else detail::schema_fail("/integrator", "expected \"rk4\" or \"euler\"");
  }
  if (j.contains("pin_goals")) {
    if (!j["pin_goals"].is_boolean()) detail::schema_fail("/pin_goals", "expected a bool");
    spec.pin_goals = j["pin_goals"].get<bool>();
  }

  const detail::json& players = detail::require(j, "players", root);
  if (!players.is_array() || players.empty())
    detail::schema_fail("/players", "expected a non-empty array");
  for (size_t i = 0; i < players.size(); ++i) {
    const std::string pp = "/players/" + std::to_string(i);
    PlayerSpec p;
    p.start = detail::require_vec<4>(players[i], "start", pp);
    p.goal = detail::require_vec<4>(players[i], "goal", pp);
    p.q_diag = detail::require_vec<4>(players[i], "q_diag", pp);
    p.qf_diag = detail::require_vec<4>(players[i], "qf_diag", pp);
    p.r_diag = detail::require_vec<2>(players[i], "r_diag", pp);
    if ((p.r_diag.array() <= 0.0).any()) detail::schema_fail(pp + "/r_diag", "must be > 0");
    if ((p.q_diag.array() < 0.0).any() || (p.qf_diag.array() < 0.0).any())
      detail::schema_fail(pp + "/q_diag", "weights must be >= 0");
    spec.players.push_back(p);
  }

  const detail::json& bounds = detail::require(j, "boundaries", root);
  if (!bounds.is_array()) detail::schema_fail("/boundaries", "expected an array");
  for (size_t i = 0; i < bounds.size(); ++i)
    spec.road.boundaries.push_back(
        detail::parse_polyline(bounds[i], "/boundaries/" + std::to_string(i)));
  if (j.contains("lanes")) {
    const json& lanes = j["lanes"];
    if (!lanes.is_array()) detail::schema_fail("/lanes", "expected an array");
    for (size_t i = 0; i < lanes.size(); ++i)
      spec.road.lanes.push_back(
          detail::parse_polyline(lanes[i], "/lanes/" + std::to_string(i)));
  }

  if (j.contains("pedestrian")) {
    const json& ped = j["pedestrian"];
    PedestrianSpec ps;
    ps.player = detail::require_int(ped, "player", "/pedestrian");
    ps.v_desired = detail::require_number(ped, "v_desired", "/pedestrian");
    ps.v_true = detail::require_number(ped, "v_true", "/pedestrian");
    if (ps.player < 0 || ps.player >= spec.player_count())
      detail::schema_fail("/pedestrian/player", "player index out of range");
    if (!(ps.v_desired > 0.0) || !(ps.v_true > 0.0))
      detail::schema_fail("/pedestrian/v_desired", "speeds must be > 0");
    spec.pedestrian = ps;
  }
  return spec;
}

inline ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

inline std::string scenario_to_json(const ScenarioSpec& spec) {
  using detail::json;
  json j;
  j["schema_version"] = kScenarioSchemaVersion;
  j["kind"] = to_string(spec.kind);
  j["radius"] = spec.radius;
  j["horizon_seconds"] = spec.horizon_seconds;
  j["steps"] = spec.steps;
  j["integrator"] = spec.integrator == IntegratorKind::RK4 ? "rk4" : "euler";
  if (spec.pin_goals) j["pin_goals"] = true;
  j["players"] = json::array();
  for (const PlayerSpec& p : spec.players) {
    json pj;
    pj["start"] = {p.start[0], p.start[1], p.start[2], p.start[3]};
    pj["goal"] = {p.goal[0], p.goal[1], p.goal[2], p.goal[3]};
    pj["q_diag"] = {p.q_diag[0], p.q_diag[1], p.q_diag[2], p.q_diag[3]};
    pj["qf_diag"] = {p.qf_diag[0], p.qf_diag[1], p.qf_diag[2], p.qf_diag[3]};
    pj["r_diag"] = {p.r_diag[0], p.r_diag[1]};
    j["players"].push_back(pj);
  }
  j["boundaries"] = json::array();
  for (const Polyline& b : spec.road.boundaries) {
    json bj = json::array();
    for (const Vector2d& p : b) bj.push_back({p.x(), p.y()});
    j["boundaries"].push_back(bj);
  }
  if (!spec.road.lanes.empty()) {
    j["lanes"] = json::array();
    for (const Polyline& b : spec.road.lanes) {
      json bj = json::array();
      for (const Vector2d& p : b) bj.push_back({p.x(), p.y()});
      j["lanes"].push_back(bj);
    }
  }
  if (spec.pedestrian) {
    j["pedestrian"] = {{"player", spec.pedestrian->player},
                       {"v_desired", spec.pedestrian->v_desired},
                       {"v_true", spec.pedestrian->v_true}};
  }
  return j.dump(2) + "\n";
}

}  // namespace trajgames

#endif  // TRAJGAMES_SCENARIO_IO_HPP
