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

#ifndef TRAJGAMES_IO_HPP
#define TRAJGAMES_IO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "trajgames/eval.hpp"
#include "trajgames/mpc.hpp"
#include "trajgames/scenarios.hpp"
#include "trajgames/solver.hpp"

namespace trajgames {

/// Write-temp-then-rename so readers never observe partial files.
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace detail {
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}
}  // namespace detail

/// One row per time step: t, then per player (px, py, theta, v, u1, u2).
/// The final row carries zero controls (no control is applied at the last
/// state).
inline std::string trajectory_csv(const GameProblem& prob, const PrimalDual& y,
                                  double dt) {
  std::ostringstream out;
  out << "t";
  for (int nu = 0; nu < prob.M; ++nu)
    out << ",px" << nu << ",py" << nu << ",theta" << nu << ",v" << nu << ",u1_" << nu
        << ",u2_" << nu;
  out << "\n";
  const TrajectoryView traj = make_view(prob, y.X, y.U);
  for (int t = 0; t < prob.N; ++t) {
    out << detail::fmt(t * dt);
    const auto x = traj.state(t);
    for (int nu = 0; nu < prob.M; ++nu) {
      for (int j = 0; j < 4; ++j) out << "," << detail::fmt(x[4 * nu + j]);
      if (t < prob.N - 1) {
        const auto u = traj.control(nu, t);
        out << "," << detail::fmt(u[0]) << "," << detail::fmt(u[1]);
      } else {
        out << ",0,0";
      }
    }
    out << "\n";
  }
  return out.str();
}

/// time, per-player state, solve duration of the update that produced the
/// executed control (empty for the initial state row).
inline std::string mpc_trace_csv(const MpcTrace& trace, int players) {
  std::ostringstream out;
  out << "t";
  for (int nu = 0; nu < players; ++nu)
    out << ",px" << nu << ",py" << nu << ",theta" << nu << ",v" << nu;
  out << ",update_seconds\n";
  for (size_t i = 0; i < trace.executed_states.size(); ++i) {
    out << detail::fmt(trace.times[i]);
    const VectorXd& x = trace.executed_states[i];
    for (int j = 0; j < 4 * players; ++j) out << "," << detail::fmt(x[j]);
    if (i + 1 < trace.executed_states.size())
      out << "," << detail::fmt(trace.update_durations[i]);
    else
      out << ",";
    out << "\n";
  }
  return out.str();
}

/// One row per Monte Carlo sample. The time column is wall clock and thus
/// run-dependent; everything else is seed-deterministic.
inline std::string samples_csv(const BatchStats& stats) {
  std::ostringstream out;
  out << "index,status,time_ms,newton_iters,outer_iters,max_violation,gnorm,"
         "max_collision_violation,resamples\n";
  for (const SampleRecord& r : stats.records) {
    out << r.index << "," << to_string(r.status) << ","
        << detail::fmt(r.solve_seconds * 1e3) << "," << r.newton_iters << ","
        << r.outer_iters << "," << detail::fmt(r.final_violation) << ","
        << detail::fmt(r.final_gnorm) << "," << detail::fmt(r.max_collision_violation)
        << "," << r.resamples << "\n";
  }
  return out.str();
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "scenario,players,mean_ms,std_ms,failures\n";
  for (const BenchRow& r : rows)
    out << r.scenario << "," << r.players << "," << detail::fmt(r.mean_ms) << ","
        << detail::fmt(r.std_ms) << "," << r.failures << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Minimal SVG output (overhead scene plots and histograms).
// ---------------------------------------------------------------------------

class SvgCanvas {
 public:
  SvgCanvas(double min_x, double min_y, double max_x, double max_y, int width = 900)
      : min_x_(min_x), min_y_(min_y), width_(width) {
    scale_ = width / (max_x - min_x);
    height_ = static_cast<int>((max_y - min_y) * scale_) + 1;
    max_y_ = max_y;
  }

  void polyline(const std::vector<Vector2d>& pts, const std::string& color,
                double stroke_width) {
    body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
          << stroke_width << "\" points=\"";
    for (const Vector2d& p : pts) body_ << px(p.x()) << "," << py(p.y()) << " ";
    body_ << "\"/>\n";
  }
  void circle(double x, double y, double r_world, const std::string& color,
              double opacity = 1.0) {
    body_ << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\""
          << r_world * scale_ << "\" fill=\"" << color << "\" fill-opacity=\""
          << opacity << "\"/>\n";
  }
  void rect_px(double x0, double y0, double w, double h, const std::string& color) {
    body_ << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << w
          << "\" height=\"" << h << "\" fill=\"" << color << "\"/>\n";
  }
  void text_px(double x, double y, const std::string& s, int size = 12) {
    body_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size
          << "\" font-family=\"sans-serif\">" << s << "</text>\n";
  }

  std::string finish() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_
        << "\" height=\"" << height_ << "\" viewBox=\"0 0 " << width_ << " "
        << height_ << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

  double px(double x) const { return (x - min_x_) * scale_; }
  double py(double y) const { return (max_y_ - y) * scale_; }

 private:
  double min_x_, min_y_ = 0.0, max_y_ = 0.0, scale_;
  int width_, height_ = 0;
  std::ostringstream body_;
};

inline const char* player_color(int nu) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#e8b000", "#2ca02c",
                                 "#9467bd", "#8c564b"};
  return colors[nu % 6];
}

namespace detail {
inline void scene_bounds(const ScenarioSpec& spec, double& min_x, double& min_y,
                         double& max_x, double& max_y) {
  min_x = min_y = 1e300;
  max_x = max_y = -1e300;
  auto grow = [&](double x, double y) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  };
  for (const auto& b : spec.road.boundaries)
    for (const auto& p : b) grow(p.x(), p.y());
  for (const auto& p : spec.players) {
    grow(p.start[0], p.start[1]);
    grow(p.goal[0], p.goal[1]);
  }
  const double pad = 2.0;
  min_x -= pad;
  min_y -= pad;
  max_x += pad;
  max_y += pad;
}
}  // namespace detail

/// Overhead plot of planned trajectories over the road geometry.
inline std::string trajectory_svg(const ScenarioSpec& spec, const GameProblem& prob,
                                  const PrimalDual& y) {
  double min_x, min_y, max_x, max_y;
  detail::scene_bounds(spec, min_x, min_y, max_x, max_y);
  SvgCanvas svg(min_x, min_y, max_x, max_y);
  for (const auto& b : spec.road.boundaries) svg.polyline(b, "#222222", 2.5);
  const TrajectoryView traj = make_view(prob, y.X, y.U);
  for (int nu = 0; nu < prob.M; ++nu) {
    std::vector<Vector2d> path;
    for (int t = 0; t < prob.N; ++t)
      path.push_back(traj.state(t).segment<2>(4 * nu));
    svg.polyline(path, player_color(nu), 1.5);
    for (int t = 0; t < prob.N; t += 2)
      svg.circle(path[static_cast<size_t>(t)].x(), path[static_cast<size_t>(t)].y(),
                 0.12, player_color(nu), 0.8);
    svg.circle(path.back().x(), path.back().y(), spec.radius / 2.0, player_color(nu),
               0.25);
  }
  return svg.finish();
}

/// Overhead plot of the executed closed-loop states, one dot per update.
inline std::string mpc_svg(const ScenarioSpec& spec, const MpcTrace& trace,
                           int players) {
  double min_x, min_y, max_x, max_y;
  detail::scene_bounds(spec, min_x, min_y, max_x, max_y);
  SvgCanvas svg(min_x, min_y, max_x, max_y);
  for (const auto& b : spec.road.boundaries) svg.polyline(b, "#222222", 2.5);
  for (int nu = 0; nu < players; ++nu) {
    for (const VectorXd& x : trace.executed_states)
      svg.circle(x[4 * nu], x[4 * nu + 1], 0.15, player_color(nu), 0.85);
  }
  return svg.finish();
}

/// Histogram panels for a Monte Carlo batch (iterations and violations).
inline std::string batch_histogram_svg(const BatchStats& stats) {
  const int W = 900, H = 320, pad = 40;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
      << H << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto panel = [&](const std::vector<int>& hist, double x0, const std::string& title) {
    const double panel_w = W / 2.0 - 2 * pad;
    const double bar_w = panel_w / hist.size();
    int peak = 1;
    for (int c : hist) peak = std::max(peak, c);
    for (size_t i = 0; i < hist.size(); ++i) {
      const double h = (H - 2.0 * pad) * hist[i] / peak;
      out << "<rect x=\"" << x0 + i * bar_w << "\" y=\"" << (H - pad - h)
          << "\" width=\"" << bar_w - 2 << "\" height=\"" << h
          << "\" fill=\"#1f77b4\"/>\n";
    }
    out << "<text x=\"" << x0 << "\" y=\"" << pad / 2 + 6
        << "\" font-size=\"14\" font-family=\"sans-serif\">" << title << "</text>\n";
  };
  panel(stats.newton_iter_histogram, pad, "Newton iterations (bucket = 4)");
  panel(stats.violation_histogram, W / 2.0 + pad, "final violation (decades)");
  out << "</svg>\n";
  return out.str();
}

}  // namespace trajgames

#endif  // TRAJGAMES_IO_HPP
