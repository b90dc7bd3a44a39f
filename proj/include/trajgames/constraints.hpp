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

#ifndef TRAJGAMES_CONSTRAINTS_HPP
#define TRAJGAMES_CONSTRAINTS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace trajgames {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Time indexing is 0-based throughout: states x_0..x_{N-1} with x_0 pinned to
// the initial condition, controls u_0..u_{N-2}. The decision states are
// x_1..x_{N-1}.

/// Read-only view over one candidate trajectory (x0, X, U).
struct TrajectoryView {
  int n = 0;
  int N = 0;
  const std::vector<int>* m_per_player = nullptr;
  const VectorXd* x0 = nullptr;            // pinned initial state
  const VectorXd* X = nullptr;             // stacked x_1..x_{N-1}
  const std::vector<VectorXd>* U = nullptr;  // per-player stacked controls

  Eigen::Ref<const VectorXd> state(int t) const {
    if (t == 0) return *x0;
    return X->segment(static_cast<long>(t - 1) * n, n);
  }
  Eigen::Ref<const VectorXd> control(int nu, int k) const {
    const int mv = (*m_per_player)[static_cast<size_t>(nu)];
    return (*U)[static_cast<size_t>(nu)].segment(static_cast<long>(k) * mv, mv);
  }
  VectorXd joint_control(int k) const {
    int m = 0;
    for (int mv : *m_per_player) m += mv;
    VectorXd u(m);
    int off = 0;
    for (size_t nu = 0; nu < m_per_player->size(); ++nu) {
      const int mv = (*m_per_player)[nu];
      u.segment(off, mv) = (*U)[nu].segment(static_cast<long>(k) * mv, mv);
      off += mv;
    }
    return u;
  }
};

/// Accumulates the gradient of one scalar constraint. Segments are keyed by
/// the time indices the constraint declared in its support.
class ConstraintGradient {
 public:
  ConstraintGradient(std::vector<int> state_times, std::vector<int> control_times,
                     int n, int m)
      : state_times_(std::move(state_times)), control_times_(std::move(control_times)) {
    state_grads_.resize(state_times_.size(), VectorXd::Zero(n));
    control_grads_.resize(control_times_.size(), VectorXd::Zero(m));
  }

  void add_state(int t, const VectorXd& g) { seg(state_times_, state_grads_, t) += g; }
  void add_control(int k, const VectorXd& g) {
    seg(control_times_, control_grads_, k) += g;
  }

  const VectorXd& state_grad(size_t i) const { return state_grads_[i]; }
  const VectorXd& control_grad(size_t i) const { return control_grads_[i]; }

  void reset() {
    for (auto& g : state_grads_) g.setZero();
    for (auto& g : control_grads_) g.setZero();
  }

 private:
  static VectorXd& seg(const std::vector<int>& times, std::vector<VectorXd>& grads,
                       int t) {
    for (size_t i = 0; i < times.size(); ++i)
      if (times[i] == t) return grads[i];
    throw std::logic_error("ConstraintGradient: write outside declared support");
  }

  std::vector<int> state_times_;
  std::vector<int> control_times_;
  std::vector<VectorXd> state_grads_;
  std::vector<VectorXd> control_grads_;
};

/// One scalar constraint over the trajectory, with a declared sparse support.
/// state_times holds the joint-state time indices it reads (each in
/// [1, N-1]); control_times the joint-control step indices (each in
/// [0, N-2]). value/gradient must only touch the declared support.
struct ScalarConstraint {
  std::string label;
  std::vector<int> state_times;
  std::vector<int> control_times;
  std::function<double(const TrajectoryView&)> value;
  std::function<void(const TrajectoryView&, ConstraintGradient&)> gradient;
};

/// Stacked constraint vector C = [C_i; C_e]: all inequalities (C <= 0) first,
/// then equalities (C = 0).
struct ConstraintSet {
  std::vector<ScalarConstraint> inequality_fns;
  std::vector<ScalarConstraint> equality_fns;

  int n_ci() const { return static_cast<int>(inequality_fns.size()); }
  int n_ce() const { return static_cast<int>(equality_fns.size()); }
  int n_c() const { return n_ci() + n_ce(); }
  bool is_inequality(int j) const { return j < n_ci(); }

  const ScalarConstraint& at(int j) const {
    return j < n_ci() ? inequality_fns[static_cast<size_t>(j)]
                      : equality_fns[static_cast<size_t>(j - n_ci())];
  }
  const std::string& label(int j) const { return at(j).label; }
};

/// Evaluates the stacked constraint vector in declared order.
inline VectorXd evaluate_constraints(const ConstraintSet& set,
                                     const TrajectoryView& traj) {
  VectorXd c(set.n_c());
  for (int j = 0; j < set.n_c(); ++j) c[j] = set.at(j).value(traj);
  return c;
}

/// Worst violation of a stacked constraint vector: positive part for the
/// first n_ci (inequality) entries, magnitude for the rest.
inline double max_violation(const VectorXd& C, int n_ci) {
  double v = 0.0;
  for (long j = 0; j < C.size(); ++j)
    v = std::max(v, j < n_ci ? std::max(C[j], 0.0) : std::abs(C[j]));
  return v;
}

}  // namespace trajgames

#endif  // TRAJGAMES_CONSTRAINTS_HPP
