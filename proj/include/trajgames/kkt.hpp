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

#ifndef TRAJGAMES_KKT_HPP
#define TRAJGAMES_KKT_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "trajgames/problem.hpp"

namespace trajgames {

/// Stacked primal-dual unknown y = [X; U^1..U^M; mu^1..mu^M].
struct PrimalDual {
  VectorXd X;
  std::vector<VectorXd> U;
  std::vector<VectorXd> mu;

  static PrimalDual zero(const GameProblem& prob) {
    PrimalDual y;
    y.X = VectorXd::Zero(prob.nbar());
    for (int nu = 0; nu < prob.M; ++nu) {
      y.U.push_back(VectorXd::Zero(prob.mbar_nu(nu)));
      y.mu.push_back(VectorXd::Zero(prob.nbar()));
    }
    return y;
  }

  VectorXd flatten(const Layout& lay) const {
    VectorXd y(lay.total);
    y.segment(0, lay.nbar) = X;
    for (int nu = 0; nu < lay.M; ++nu) {
      y.segment(lay.u_offset[static_cast<size_t>(nu)], U[static_cast<size_t>(nu)].size()) =
          U[static_cast<size_t>(nu)];
      y.segment(lay.mu_offset[static_cast<size_t>(nu)], lay.nbar) =
          mu[static_cast<size_t>(nu)];
    }
    return y;
  }

  static PrimalDual unflatten(const Layout& lay, const VectorXd& y) {
    PrimalDual pd;
    pd.X = y.segment(0, lay.nbar);
    for (int nu = 0; nu < lay.M; ++nu) {
      const long mb = static_cast<long>(lay.m_nu[static_cast<size_t>(nu)]) * lay.S;
      pd.U.push_back(y.segment(lay.u_offset[static_cast<size_t>(nu)], mb));
      pd.mu.push_back(y.segment(lay.mu_offset[static_cast<size_t>(nu)], lay.nbar));
    }
    return pd;
  }

  /// In-place y <- y + alpha * dy, dy in flattened order.
  void add_scaled(const Layout& lay, double alpha, const VectorXd& dy) {
    X += alpha * dy.segment(0, lay.nbar);
    for (int nu = 0; nu < lay.M; ++nu) {
      U[static_cast<size_t>(nu)] +=
          alpha * dy.segment(lay.u_offset[static_cast<size_t>(nu)],
                             U[static_cast<size_t>(nu)].size());
      mu[static_cast<size_t>(nu)] +=
          alpha * dy.segment(lay.mu_offset[static_cast<size_t>(nu)], lay.nbar);
    }
  }
};

/// Shared augmented-Lagrangian multipliers and penalties. lambda and rho are
/// common to all players; the first n_ci entries belong to inequalities.
struct ALState {
  VectorXd lambda;
  VectorXd rho;
  double gamma = 10.0;
  double rho_max = 1e8;
  int n_ci = 0;

  static ALState fresh(const ConstraintSet& set, double rho0, double gamma,
                       double rho_max) {
    if (!(gamma > 1.0)) throw std::invalid_argument("ALState: gamma must be > 1");
    if (!(rho0 > 0.0)) throw std::invalid_argument("ALState: rho0 must be > 0");
    ALState al;
    al.lambda = VectorXd::Zero(set.n_c());
    al.rho = VectorXd::Constant(set.n_c(), rho0);
    al.gamma = gamma;
    al.rho_max = rho_max;
    al.n_ci = set.n_ci();
    return al;
  }
};

/// Thrown by newton_step when the regularized system stays unsolvable after
/// all escalation attempts.
struct SingularSystemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Penalty activation weights: entry k is 0 for an inactive inequality
/// (C_k < 0 with a zero multiplier), rho_k otherwise. Equalities always
/// carry rho_k.
inline VectorXd penalty_weights(const VectorXd& C_vals, const ALState& al) {
  if (C_vals.size() != al.lambda.size() || C_vals.size() != al.rho.size())
    throw std::invalid_argument("penalty_weights: length mismatch");
  VectorXd w(C_vals.size());
  for (long k = 0; k < C_vals.size(); ++k) {
    const bool inactive = k < al.n_ci && C_vals[k] < 0.0 && al.lambda[k] == 0.0;
    w[k] = inactive ? 0.0 : al.rho[k];
  }
  return w;
}

namespace detail {

/// All quantities shared between residual, Jacobian and objective evaluation
/// at one primal-dual point. A, B and constraint gradients are only filled
/// when first_order is requested.
struct GameEval {
  std::vector<VectorXd> f;  // f(x_k, u_k)
  std::vector<MatrixXd> A;  // d f / d x at stage k
  std::vector<MatrixXd> B;  // d f / d u at stage k
  VectorXd D;
  VectorXd C;
  VectorXd w;       // penalty weights
  VectorXd lamtil;  // lambda + w .* C
  std::vector<ConstraintGradient> cgrad;
};

inline void evaluate_game(const GameProblem& prob, const PrimalDual& y,
                          const ALState& al, bool first_order, GameEval& ev) {
  const int n = prob.n();
  const int S = prob.stages();
  const TrajectoryView traj = make_view(prob, y.X, y.U);

  ev.f.assign(static_cast<size_t>(S), VectorXd());
  if (first_order) {
    ev.A.assign(static_cast<size_t>(S), MatrixXd());
    ev.B.assign(static_cast<size_t>(S), MatrixXd());
  }
  ev.D.resize(prob.nbar());
  for (int k = 0; k < S; ++k) {
    const VectorXd u = traj.joint_control(k);
    const VectorXd xk = traj.state(k);
    ev.f[static_cast<size_t>(k)] = dynamics_step(prob.dynamics, xk, u);
    ev.D.segment(static_cast<long>(k) * n, n) =
        traj.state(k + 1) - ev.f[static_cast<size_t>(k)];
    if (first_order) {
      auto [A, B] = dynamics_jacobians(prob.dynamics, xk, u);
      ev.A[static_cast<size_t>(k)] = std::move(A);
      ev.B[static_cast<size_t>(k)] = std::move(B);
    }
  }

  const ConstraintSet& set = prob.constraints;
  ev.C = evaluate_constraints(set, traj);
  ev.w = penalty_weights(ev.C, al);
  ev.lamtil = al.lambda + ev.w.cwiseProduct(ev.C);
  if (first_order) {
    ev.cgrad.clear();
    ev.cgrad.reserve(static_cast<size_t>(set.n_c()));
    for (int j = 0; j < set.n_c(); ++j) {
      const ScalarConstraint& c = set.at(j);
      ev.cgrad.emplace_back(c.state_times, c.control_times, n, prob.m());
      c.gradient(traj, ev.cgrad.back());
    }
  }
}

/// Writes player nu's augmented-Lagrangian gradient over (X, U^nu) into
/// out (length nbar + mbar_nu), given a first-order evaluation.
inline void player_gradient_into(const GameProblem& prob, const Layout& lay,
                                 const PrimalDual& y, const GameEval& ev, int nu,
                                 Eigen::Ref<VectorXd> out) {
  const int n = lay.n;
  const int S = lay.S;
  const int mv = lay.m_nu[static_cast<size_t>(nu)];
  const long nbar = lay.nbar;
  const PlayerCost& cost = prob.costs[static_cast<size_t>(nu)];
  const VectorXd& Unu = y.U[static_cast<size_t>(nu)];
  const VectorXd& munu = y.mu[static_cast<size_t>(nu)];

  out.setZero();
  // Cost gradient.
  for (int t = 1; t <= S; ++t) {
    const MatrixXd& W = (t == S) ? cost.Qf : cost.Q;
    const long off = static_cast<long>(t - 1) * n;
    out.segment(off, n) = W * (y.X.segment(off, n) - cost.x_f);
  }
  for (int k = 0; k < S; ++k)
    out.segment(nbar + static_cast<long>(k) * mv, mv) =
        cost.R * Unu.segment(static_cast<long>(k) * mv, mv);

  // Dynamics-multiplier terms from mu^T D with D_k = x_{k+1} - f(x_k, u_k).
  for (int t = 1; t <= S; ++t) {
    const long off = static_cast<long>(t - 1) * n;
    out.segment(off, n) += munu.segment(static_cast<long>(t - 1) * n, n);
    if (t <= S - 1)
      out.segment(off, n) -= ev.A[static_cast<size_t>(t)].transpose() *
                             munu.segment(static_cast<long>(t) * n, n);
  }
  const int u_off_joint = prob.dynamics.control_offset(nu);
  for (int k = 0; k < S; ++k) {
    out.segment(nbar + static_cast<long>(k) * mv, mv) -=
        ev.B[static_cast<size_t>(k)].middleCols(u_off_joint, mv).transpose() *
        munu.segment(static_cast<long>(k) * n, n);
  }

  // Constraint terms: (grad C)^T (lambda + I_rho C).
  const ConstraintSet& set = prob.constraints;
  for (int j = 0; j < set.n_c(); ++j) {
    const double lj = ev.lamtil[j];
    if (lj == 0.0) continue;
    const ScalarConstraint& c = set.at(j);
    const ConstraintGradient& g = ev.cgrad[static_cast<size_t>(j)];
    for (size_t i = 0; i < c.state_times.size(); ++i) {
      const long off = static_cast<long>(c.state_times[i] - 1) * n;
      out.segment(off, n) += lj * g.state_grad(i);
    }
    for (size_t i = 0; i < c.control_times.size(); ++i) {
      const long off = nbar + static_cast<long>(c.control_times[i]) * mv;
      out.segment(off, mv) += lj * g.control_grad(i).segment(u_off_joint, mv);
    }
  }
}

}  // namespace detail

/// Augmented Lagrangian of player nu:
/// L = J + mu^T D + lambda^T C + 0.5 C^T I_rho C.
inline double al_objective(const GameProblem& prob, const PrimalDual& y,
                           const ALState& al, int nu) {
  if (nu < 0 || nu >= prob.M)
    throw std::invalid_argument("al_objective: player index out of range");
  detail::GameEval ev;
  detail::evaluate_game(prob, y, al, /*first_order=*/false, ev);
  double L = game_cost(prob, nu, y.X, y.U);
  L += y.mu[static_cast<size_t>(nu)].dot(ev.D);
  L += al.lambda.dot(ev.C);
  L += 0.5 * ev.C.dot(ev.w.cwiseProduct(ev.C));
  return L;
}

/// Analytic gradient of al_objective with respect to (X, U^nu).
inline VectorXd player_gradient(const GameProblem& prob, const PrimalDual& y,
                                const ALState& al, int nu) {
  if (nu < 0 || nu >= prob.M)
    throw std::invalid_argument("player_gradient: player index out of range");
  const Layout lay(prob);
  detail::GameEval ev;
  detail::evaluate_game(prob, y, al, /*first_order=*/true, ev);
  VectorXd g(lay.nbar + static_cast<long>(lay.m_nu[static_cast<size_t>(nu)]) * lay.S);
  detail::player_gradient_into(prob, lay, y, ev, nu, g);
  return g;
}

/// KKT residual G = [G^1; ..; G^M; D].
inline VectorXd residual(const GameProblem& prob, const PrimalDual& y,
                         const ALState& al) {
  const Layout lay(prob);
  detail::GameEval ev;
  detail::evaluate_game(prob, y, al, /*first_order=*/true, ev);
  VectorXd G(lay.total);
  for (int nu = 0; nu < prob.M; ++nu) {
    const long len = lay.nbar + static_cast<long>(lay.m_nu[static_cast<size_t>(nu)]) * lay.S;
    detail::player_gradient_into(prob, lay, y, ev, nu,
                                 G.segment(lay.g_offset[static_cast<size_t>(nu)], len));
  }
  G.segment(lay.d_offset, lay.nbar) = ev.D;
  return G;
}

/// Stage-wise structure metadata of the KKT matrix. Rows and columns are
/// grouped per stage s: rows (grad-u of all players, defect D_s, grad-x of
/// all players), columns (u_s, x_{s+1}, mu_s of all players). reg_sign pairs
/// each within-stage row with its column for the quasidefinite-style
/// regularization: +1 on primal pairs, -1 on dual pairs.
struct BlockIndex {
  int S = 0;
  long stage_size = 0;
  std::vector<long> row_order;  // permuted position -> original row
  std::vector<long> col_order;  // permuted position -> original column
  std::vector<int> reg_sign;    // per within-stage position
  std::vector<int> row_stage;   // original row -> stage
  std::vector<int> col_stage;   // original column -> stage
  bool band_ok = true;          // every constraint spans adjacent stages only

  BlockIndex() = default;
  BlockIndex(const Layout& lay, const ConstraintSet& set) {
    S = lay.S;
    stage_size = lay.m + lay.n + static_cast<long>(lay.M) * lay.n;
    row_order.resize(static_cast<size_t>(lay.total));
    col_order.resize(static_cast<size_t>(lay.total));
    reg_sign.resize(static_cast<size_t>(stage_size));
    row_stage.resize(static_cast<size_t>(lay.total));
    col_stage.resize(static_cast<size_t>(lay.total));

    long p = 0;
    for (int s = 0; s < S; ++s) {
      for (int nu = 0; nu < lay.M; ++nu)
        for (int i = 0; i < lay.m_nu[static_cast<size_t>(nu)]; ++i)
          row_order[static_cast<size_t>(p++)] = lay.gu_row(nu, s) + i;
      for (int i = 0; i < lay.n; ++i)
        row_order[static_cast<size_t>(p++)] = lay.d_row(s) + i;
      for (int nu = 0; nu < lay.M; ++nu)
        for (int i = 0; i < lay.n; ++i)
          row_order[static_cast<size_t>(p++)] = lay.gx_row(nu, s + 1) + i;
    }
    p = 0;
    for (int s = 0; s < S; ++s) {
      for (int nu = 0; nu < lay.M; ++nu)
        for (int i = 0; i < lay.m_nu[static_cast<size_t>(nu)]; ++i)
          col_order[static_cast<size_t>(p++)] = lay.u_col(nu, s) + i;
      for (int i = 0; i < lay.n; ++i)
        col_order[static_cast<size_t>(p++)] = lay.x_col(s + 1) + i;
      for (int nu = 0; nu < lay.M; ++nu)
        for (int i = 0; i < lay.n; ++i)
          col_order[static_cast<size_t>(p++)] = lay.mu_col(nu, s) + i;
    }
    for (long i = 0; i < stage_size; ++i)
      reg_sign[static_cast<size_t>(i)] = (i < lay.m + lay.n) ? 1 : -1;

    for (long q = 0; q < lay.total; ++q) {
      row_stage[static_cast<size_t>(row_order[static_cast<size_t>(q)])] =
          static_cast<int>(q / stage_size);
      col_stage[static_cast<size_t>(col_order[static_cast<size_t>(q)])] =
          static_cast<int>(q / stage_size);
    }

    for (int j = 0; j < set.n_c(); ++j) {
      const ScalarConstraint& c = set.at(j);
      int lo = S, hi = -1;
      for (int t : c.state_times) {
        lo = std::min(lo, t - 1);
        hi = std::max(hi, t - 1);
      }
      for (int k : c.control_times) {
        lo = std::min(lo, k);
        hi = std::max(hi, k);
      }
      if (hi >= 0 && hi - lo > 1) band_ok = false;
    }
  }
};

/// Residual G and quasi-Newton Jacobian H at one point, plus the stage
/// sparsity map. H row order follows G, column order follows y.
struct KKTSystem {
  Layout layout;
  BlockIndex block_index;
  VectorXd G;
  MatrixXd H;
};

/// Assembles G and H into sys (reusing its storage). Second derivatives of
/// the dynamics and constraints are dropped: cost Hessians are exact and the
/// penalty term contributes its Gauss-Newton part (grad C)^T I_rho (grad C).
inline void assemble_kkt(const GameProblem& prob, const PrimalDual& y,
                         const ALState& al, KKTSystem& sys) {
  if (sys.layout.total == 0) {
    sys.layout = Layout(prob);
    sys.block_index = BlockIndex(sys.layout, prob.constraints);
  }
  const Layout& lay = sys.layout;
  const int n = lay.n;
  const int S = lay.S;

  detail::GameEval ev;
  detail::evaluate_game(prob, y, al, /*first_order=*/true, ev);

  sys.G.resize(lay.total);
  for (int nu = 0; nu < prob.M; ++nu) {
    const long len = lay.nbar + static_cast<long>(lay.m_nu[static_cast<size_t>(nu)]) * lay.S;
    detail::player_gradient_into(prob, lay, y, ev, nu,
                                 sys.G.segment(lay.g_offset[static_cast<size_t>(nu)], len));
  }
  sys.G.segment(lay.d_offset, lay.nbar) = ev.D;

  sys.H.resize(lay.total, lay.total);
  sys.H.setZero();

  const MatrixXd I_n = MatrixXd::Identity(n, n);
  for (int nu = 0; nu < prob.M; ++nu) {
    const PlayerCost& cost = prob.costs[static_cast<size_t>(nu)];
    const int mv = lay.m_nu[static_cast<size_t>(nu)];
    const int u_off_joint = prob.dynamics.control_offset(nu);
    // Cost Hessians.
    for (int t = 1; t <= S; ++t)
      sys.H.block(lay.gx_row(nu, t), lay.x_col(t), n, n) = (t == S) ? cost.Qf : cost.Q;
    for (int k = 0; k < S; ++k)
      sys.H.block(lay.gu_row(nu, k), lay.u_col(nu, k), mv, mv) = cost.R;
    // d G^nu / d mu^nu.
    for (int t = 1; t <= S; ++t) {
      sys.H.block(lay.gx_row(nu, t), lay.mu_col(nu, t - 1), n, n) = I_n;
      if (t <= S - 1)
        sys.H.block(lay.gx_row(nu, t), lay.mu_col(nu, t), n, n) =
            -ev.A[static_cast<size_t>(t)].transpose();
    }
    for (int k = 0; k < S; ++k)
      sys.H.block(lay.gu_row(nu, k), lay.mu_col(nu, k), mv, n) =
          -ev.B[static_cast<size_t>(k)].middleCols(u_off_joint, mv).transpose();
  }

  // Defect rows.
  for (int k = 0; k < S; ++k) {
    sys.H.block(lay.d_row(k), lay.x_col(k + 1), n, n) = I_n;
    if (k >= 1)
      sys.H.block(lay.d_row(k), lay.x_col(k), n, n) = -ev.A[static_cast<size_t>(k)];
    for (int nu = 0; nu < prob.M; ++nu) {
      const int mv = lay.m_nu[static_cast<size_t>(nu)];
      sys.H.block(lay.d_row(k), lay.u_col(nu, k), n, mv) =
          -ev.B[static_cast<size_t>(k)].middleCols(prob.dynamics.control_offset(nu), mv);
    }
  }

  // Gauss-Newton penalty curvature, rows per player over (X, U^nu), columns
  // over all primal variables.
  const ConstraintSet& set = prob.constraints;
  for (int j = 0; j < set.n_c(); ++j) {
    const double wj = ev.w[j];
    if (wj == 0.0) continue;
    const ScalarConstraint& c = set.at(j);
    const ConstraintGradient& g = ev.cgrad[static_cast<size_t>(j)];

    // Gradient segments keyed by their global row/column offset.
    struct Seg {
      long idx;             // global row or column offset
      const VectorXd* vec;  // joint-space gradient segment
      long off;             // offset into *vec
      int len;
    };
    std::vector<Seg> cols;
    for (size_t i = 0; i < c.state_times.size(); ++i)
      cols.push_back({lay.x_col(c.state_times[i]), &g.state_grad(i), 0, n});
    for (size_t i = 0; i < c.control_times.size(); ++i)
      for (int sigma = 0; sigma < prob.M; ++sigma)
        cols.push_back({lay.u_col(sigma, c.control_times[i]), &g.control_grad(i),
                        prob.dynamics.control_offset(sigma),
                        lay.m_nu[static_cast<size_t>(sigma)]});

    for (int nu = 0; nu < prob.M; ++nu) {
      const int mv = lay.m_nu[static_cast<size_t>(nu)];
      const int u_off_joint = prob.dynamics.control_offset(nu);
      std::vector<Seg> rows;
      for (size_t i = 0; i < c.state_times.size(); ++i)
        rows.push_back({lay.gx_row(nu, c.state_times[i]), &g.state_grad(i), 0, n});
      for (size_t i = 0; i < c.control_times.size(); ++i)
        rows.push_back({lay.gu_row(nu, c.control_times[i]), &g.control_grad(i),
                        u_off_joint, mv});
      for (const Seg& row : rows)
        for (const Seg& col : cols)
          sys.H.block(row.idx, col.idx, row.len, col.len) +=
              wj * row.vec->segment(row.off, row.len) *
              col.vec->segment(col.off, col.len).transpose();
    }
  }
}

/// Assembles a fresh KKTSystem at one point.
inline KKTSystem residual_jacobian(const GameProblem& prob, const PrimalDual& y,
                                   const ALState& al) {
  KKTSystem sys;
  assemble_kkt(prob, y, al, sys);
  return sys;
}

namespace detail {

/// Adds the signed regularization pairs to a dense copy of H.
inline void apply_regularization(const KKTSystem& sys, double eps, MatrixXd& Hreg) {
  if (eps == 0.0) return;
  const BlockIndex& bi = sys.block_index;
  for (long q = 0; q < static_cast<long>(bi.row_order.size()); ++q) {
    const long i = q % bi.stage_size;
    Hreg(bi.row_order[static_cast<size_t>(q)], bi.col_order[static_cast<size_t>(q)]) +=
        eps * bi.reg_sign[static_cast<size_t>(i)];
  }
}

inline bool finite_and_accurate(const MatrixXd& Hreg, const VectorXd& G,
                                const VectorXd& dy) {
  if (!dy.allFinite()) return false;
  const double resid = (Hreg * dy + G).cwiseAbs().maxCoeff();
  return resid <= 1e-6 * std::max(1.0, G.cwiseAbs().maxCoeff());
}

}  // namespace detail

/// Dense Newton step solving (H + eps_reg * I_reg) dy = -G. I_reg pairs
/// primal rows/columns with +1 and dual ones with -1. On factorization
/// failure eps_reg escalates by x10 up to 5 times before throwing
/// SingularSystemError.
inline VectorXd newton_step(const KKTSystem& sys, double eps_reg) {
  if (!(eps_reg >= 0.0) || !std::isfinite(eps_reg))
    throw std::invalid_argument("newton_step: eps_reg must be finite and >= 0");
  double eps = eps_reg;
  for (int attempt = 0; attempt <= 5; ++attempt) {
    MatrixXd Hreg = sys.H;
    detail::apply_regularization(sys, eps, Hreg);
    Eigen::PartialPivLU<MatrixXd> lu(Hreg);
    VectorXd dy = lu.solve(-sys.G);
    if (detail::finite_and_accurate(Hreg, sys.G, dy)) return dy;
    eps = (eps > 0.0) ? 10.0 * eps : 1e-8;
  }
  throw SingularSystemError("newton_step: system singular after regularization");
}

/// Stage-wise block-tridiagonal elimination: backward pass over the stage
/// blocks, then a forward substitution. Same answer as newton_step at
/// O(N (n + m + n M)^3) cost. Falls back to the dense path (with a warning)
/// if a stage pivot block is singular or the problem is not stage-banded.
inline VectorXd structured_solve(const KKTSystem& sys, double eps_reg = 0.0) {
  const BlockIndex& bi = sys.block_index;
  const long B = bi.stage_size;
  const int S = bi.S;

  auto fallback = [&](const char* why) {
    std::cerr << "trajgames: structured_solve falling back to dense path (" << why
              << ")\n";
    return newton_step(sys, eps_reg);
  };
  if (!bi.band_ok) return fallback("constraints span non-adjacent stages");

  auto gather_block = [&](int srow, int scol, MatrixXd& out) {
    for (long i = 0; i < B; ++i) {
      const long r = bi.row_order[static_cast<size_t>(srow * B + i)];
      for (long j = 0; j < B; ++j)
        out(i, j) = sys.H(r, bi.col_order[static_cast<size_t>(scol * B + j)]);
    }
  };

  std::vector<Eigen::PartialPivLU<MatrixXd>> phi_lu(static_cast<size_t>(S));
  std::vector<VectorXd> rtil(static_cast<size_t>(S));
  std::vector<MatrixXd> Lblk(static_cast<size_t>(S));  // stage s rows vs s-1 cols

  MatrixXd T(B, B), V(B, B), phi(B, B);
  VectorXd r(B);

  // Backward elimination from the last stage.
  for (int s = S - 1; s >= 0; --s) {
    gather_block(s, s, T);
    for (long i = 0; i < B; ++i)
      T(i, i) += eps_reg * bi.reg_sign[static_cast<size_t>(i)];
    for (long i = 0; i < B; ++i)
      r[i] = -sys.G[bi.row_order[static_cast<size_t>(s * B + i)]];
    if (s >= 1) {
      Lblk[static_cast<size_t>(s)].resize(B, B);
      gather_block(s, s - 1, Lblk[static_cast<size_t>(s)]);
    }
    if (s <= S - 2) {
      gather_block(s, s + 1, V);
      const MatrixXd W = phi_lu[static_cast<size_t>(s + 1)].solve(
          Lblk[static_cast<size_t>(s + 1)]);
      phi = T - V * W;
      r -= V * phi_lu[static_cast<size_t>(s + 1)].solve(rtil[static_cast<size_t>(s + 1)]);
    } else {
      phi = T;
    }
    phi_lu[static_cast<size_t>(s)].compute(phi);
    // Partial-pivot LU has no rank probe; a degenerate pivot surfaces as a
    // non-finite or wildly inaccurate stage solve.
    const VectorXd probe = phi_lu[static_cast<size_t>(s)].solve(r);
    if (!probe.allFinite()) return fallback("singular stage pivot block");
    rtil[static_cast<size_t>(s)] = r;
  }

  // Forward substitution.
  VectorXd dy(sys.layout.total);
  VectorXd z_prev;
  for (int s = 0; s < S; ++s) {
    VectorXd rhs = rtil[static_cast<size_t>(s)];
    if (s >= 1) rhs -= Lblk[static_cast<size_t>(s)] * z_prev;
    VectorXd z = phi_lu[static_cast<size_t>(s)].solve(rhs);
    if (!z.allFinite()) return fallback("singular stage pivot block");
    for (long i = 0; i < B; ++i)
      dy[bi.col_order[static_cast<size_t>(s * B + i)]] = z[i];
    z_prev = std::move(z);
  }
  return dy;
}

}  // namespace trajgames

#endif  // TRAJGAMES_KKT_HPP
