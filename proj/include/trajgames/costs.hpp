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

#ifndef TRAJGAMES_COSTS_HPP
#define TRAJGAMES_COSTS_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>

namespace trajgames {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace detail {

inline void check_weight(const MatrixXd& W, const char* name, double min_eig) {
  if (W.rows() != W.cols())
    throw std::invalid_argument(std::string("PlayerCost: ") + name + " must be square");
  const double scale = 1.0 + W.cwiseAbs().maxCoeff();
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument(std::string("PlayerCost: ") + name +
                                " must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (W + W.transpose()),
                                             Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < min_eig - 1e-10)
    throw std::invalid_argument(std::string("PlayerCost: ") + name +
                                " violates its definiteness requirement");
}

}  // namespace detail

/// Quadratic tracking cost of one player: stage terms on states and that
/// player's controls, plus a terminal term. Q, Qf are PSD, R is PD.
struct PlayerCost {
  MatrixXd Q;   // n x n, PSD
  MatrixXd R;   // m^nu x m^nu, PD
  MatrixXd Qf;  // n x n, PSD
  VectorXd x_f;

  PlayerCost() = default;
  PlayerCost(MatrixXd Q_, MatrixXd R_, MatrixXd Qf_, VectorXd x_f_)
      : Q(std::move(Q_)), R(std::move(R_)), Qf(std::move(Qf_)), x_f(std::move(x_f_)) {
    detail::check_weight(Q, "Q", 0.0);
    detail::check_weight(Qf, "Qf", 0.0);
    detail::check_weight(R, "R", 1e-10);
    if (x_f.size() != Q.rows())
      throw std::invalid_argument("PlayerCost: x_f dimension mismatch");
  }

  int state_dim() const { return static_cast<int>(Q.rows()); }
  int control_dim() const { return static_cast<int>(R.rows()); }
};

// X stacks the decision states x_2..x_N; U_nu stacks u_1..u_{N-1} of one
// player. The x_1 stage term is constant in the decision variables and is
// omitted from the value.
inline double cost_eval(const PlayerCost& cost, const VectorXd& X, const VectorXd& U_nu) {
  const int n = cost.state_dim();
  const int mv = cost.control_dim();
  if (X.size() % n != 0 || U_nu.size() % mv != 0 || X.size() / n != U_nu.size() / mv)
    throw std::invalid_argument("cost_eval: stacked dimension mismatch");
  const int S = static_cast<int>(X.size()) / n;  // number of decision states

  double total = 0.0;
  for (int s = 0; s < S - 1; ++s) {
    const VectorXd dx = X.segment(static_cast<long>(s) * n, n) - cost.x_f;
    total += 0.5 * dx.dot(cost.Q * dx);
  }
  const VectorXd dxN = X.segment(static_cast<long>(S - 1) * n, n) - cost.x_f;
  total += 0.5 * dxN.dot(cost.Qf * dxN);
  for (int k = 0; k < S; ++k) {
    const VectorXd uk = U_nu.segment(static_cast<long>(k) * mv, mv);
    total += 0.5 * uk.dot(cost.R * uk);
  }
  return total;
}

/// Exact gradient and Hessian over the stacked (X, U_nu) vector. The Hessian
/// is block diagonal: Q blocks on intermediate states, Qf on the final state,
/// R on each control stage.
inline std::pair<VectorXd, MatrixXd> cost_derivatives(const PlayerCost& cost,
                                                      const VectorXd& X,
                                                      const VectorXd& U_nu) {
  const int n = cost.state_dim();
  const int mv = cost.control_dim();
  if (X.size() % n != 0 || U_nu.size() % mv != 0 || X.size() / n != U_nu.size() / mv)
    throw std::invalid_argument("cost_derivatives: stacked dimension mismatch");
  const int S = static_cast<int>(X.size()) / n;
  const long nbar = X.size();
  const long dim = nbar + U_nu.size();

  VectorXd grad = VectorXd::Zero(dim);
  MatrixXd hess = MatrixXd::Zero(dim, dim);
  for (int s = 0; s < S; ++s) {
    const MatrixXd& W = (s == S - 1) ? cost.Qf : cost.Q;
    const long off = static_cast<long>(s) * n;
    grad.segment(off, n) = W * (X.segment(off, n) - cost.x_f);
    hess.block(off, off, n, n) = W;
  }
  for (int k = 0; k < S; ++k) {
    const long off = nbar + static_cast<long>(k) * mv;
    grad.segment(off, mv) = cost.R * U_nu.segment(static_cast<long>(k) * mv, mv);
    hess.block(off, off, mv, mv) = cost.R;
  }
  return {std::move(grad), std::move(hess)};
}

}  // namespace trajgames

#endif  // TRAJGAMES_COSTS_HPP
