#pragma once

// Brute-force references shared by the unit and acceptance tests.

#include "ordinal_itr/solver.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace oracle {

using namespace ordinal_itr;

struct GridOptimum
{
  double objective = -std::numeric_limits<double>::infinity();
  std::vector<double> alpha, eta;
};

/// Per-row active bound and effective label.
struct Reduced
{
  std::vector<double> upper;
  std::vector<int> y;
  std::vector<std::vector<std::size_t>> blocks;  ///< row indices per threshold
};

inline Reduced reduce(const std::vector<DuplicatedSample> & rows, double C, int levels)
{
  Reduced r;
  r.blocks.resize(static_cast<std::size_t>(levels - 1));
  for (std::size_t s = 0; s < rows.size(); ++s) {
    r.upper.push_back(C * rows[s].weight);
    r.y.push_back(rows[s].effective_label());
    r.blocks[static_cast<std::size_t>(rows[s].threshold - 1)].push_back(s);
  }
  return r;
}

inline void split(const std::vector<DuplicatedSample> & rows, const std::vector<double> & beta, std::vector<double> & alpha,
                  std::vector<double> & eta)
{
  alpha.assign(rows.size(), 0.0);
  eta.assign(rows.size(), 0.0);
  for (std::size_t s = 0; s < rows.size(); ++s) (rows[s].nonnegative_reward() ? alpha : eta)[s] = beta[s];
}

/**
 * Maximizes L_D over the feasible polytope on a grid in the free coordinates
 * (the last row of each threshold block is eliminated by its equality). The
 * grid is refined around the incumbent until its step falls below `final_step`.
 */
inline GridOptimum grid_maximize(const std::vector<DuplicatedSample> & rows, const Eigen::MatrixXd & gram, double C,
                                 int levels, int points = 11, double final_step = 1e-9)
{
  const Reduced red = reduce(rows, C, levels);
  std::vector<std::size_t> free_rows, dependent;
  for (const auto & b : red.blocks) {
    if (b.empty()) continue;
    for (std::size_t i = 0; i + 1 < b.size(); ++i) free_rows.push_back(b[i]);
    dependent.push_back(b.back());
  }
  const std::size_t d = free_rows.size();
  std::vector<double> beta(rows.size(), 0.0), lo(d), hi(d), centre(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    lo[j] = 0.0;
    hi[j] = red.upper[free_rows[j]];
  }

  GridOptimum best;
  const auto evaluate = [&](const std::vector<double> & z) {
    std::fill(beta.begin(), beta.end(), 0.0);
    for (std::size_t j = 0; j < d; ++j) beta[free_rows[j]] = z[j];
    for (const auto & b : red.blocks) {
      if (b.empty()) continue;
      double s = 0.0;
      for (std::size_t i = 0; i + 1 < b.size(); ++i) s += red.y[b[i]] * beta[b[i]];
      const double v = -red.y[b.back()] * s;
      if (v < -1e-15 || v > red.upper[b.back()] + 1e-15) return;
      beta[b.back()] = std::clamp(v, 0.0, red.upper[b.back()]);
    }
    std::vector<double> a, e;
    split(rows, beta, a, e);
    const double obj = dual_objective(rows, gram, a, e);
    if (obj > best.objective) {
      best.objective = obj;
      best.alpha = a;
      best.eta = e;
      for (std::size_t j = 0; j < d; ++j) centre[j] = z[j];
    }
  };

  std::vector<double> z(d);
  double max_step = 1.0;
  for (int round = 0; round < 1000 && max_step > final_step; ++round) {
    std::vector<double> step(d);
    max_step = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      step[j] = (hi[j] - lo[j]) / (points - 1);
      max_step = std::max(max_step, step[j]);
    }
    std::vector<int> idx(d, 0);
    for (;;) {
      for (std::size_t j = 0; j < d; ++j) z[j] = lo[j] + idx[j] * step[j];
      evaluate(z);
      std::size_t j = 0;
      while (j < d && ++idx[j] == points) idx[j++] = 0;
      if (j == d) break;
    }
    if (d == 0) break;
    // keep four steps either side of the incumbent so the search can travel along ridges
    for (std::size_t j = 0; j < d; ++j) {
      const double ub = red.upper[free_rows[j]];
      lo[j] = std::max(0.0, centre[j] - 4.0 * step[j]);
      hi[j] = std::min(ub, centre[j] + 4.0 * step[j]);
    }
  }
  if (best.alpha.empty()) split(rows, std::vector<double>(rows.size(), 0.0), best.alpha, best.eta);
  return best;
}

/**
 * Exact maximizer of L_D by exhaustive enumeration of the feasible
 * polytope's faces: every row sits at 0, at its upper bound or is free, and
 * the free rows solve the face's equality-constrained stationarity system.
 * Feasible stationary points are compared and the best is kept.
 */
inline GridOptimum face_enumeration(const std::vector<DuplicatedSample> & rows, const Eigen::MatrixXd & gram, double C,
                                    int levels)
{
  const Reduced red = reduce(rows, C, levels);
  const std::size_t m = rows.size();
  Eigen::MatrixXd Q(m, m);
  for (std::size_t s = 0; s < m; ++s)
    for (std::size_t t = 0; t < m; ++t)
      Q(s, t) = red.y[s] * red.y[t] *
                (gram(rows[s].base_index, rows[t].base_index) + (rows[s].threshold == rows[t].threshold ? 1.0 : 0.0));
  const int blocks = levels - 1;

  GridOptimum best;
  std::vector<int> state(m, 0);  // 0 lower, 1 upper, 2 free
  for (;;) {
    std::vector<std::size_t> F;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    for (std::size_t s = 0; s < m; ++s) {
      if (state[s] == 1) beta[static_cast<Eigen::Index>(s)] = red.upper[s];
      if (state[s] == 2) F.push_back(s);
    }
    bool ok = true;
    if (!F.empty()) {
      const auto f = static_cast<Eigen::Index>(F.size());
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(f + blocks, f + blocks);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(f + blocks);
      const Eigen::VectorXd qb = Q * beta;
      for (Eigen::Index a = 0; a < f; ++a) {
        const auto s = F[static_cast<std::size_t>(a)];
        for (Eigen::Index b = 0; b < f; ++b) kkt(a, b) = Q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(F[static_cast<std::size_t>(b)]));
        const Eigen::Index k = rows[s].threshold - 1;
        kkt(a, f + k) = red.y[s];
        kkt(f + k, a) = red.y[s];
        rhs[a] = 1.0 - qb[static_cast<Eigen::Index>(s)];
      }
      for (std::size_t s = 0; s < m; ++s)
        if (state[s] == 1) rhs[f + rows[s].threshold - 1] -= red.y[s] * red.upper[s];
      const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(kkt);
      const Eigen::VectorXd sol = cod.solve(rhs);
      ok = (kkt * sol - rhs).norm() <= 1e-9 * (1.0 + rhs.norm());
      for (Eigen::Index a = 0; ok && a < f; ++a) {
        const auto s = F[static_cast<std::size_t>(a)];
        if (sol[a] < -1e-12 || sol[a] > red.upper[s] + 1e-12) ok = false;
        beta[static_cast<Eigen::Index>(s)] = std::clamp(sol[a], 0.0, red.upper[s]);
      }
    }
    if (ok) {
      std::vector<double> viol(static_cast<std::size_t>(blocks), 0.0);
      for (std::size_t s = 0; s < m; ++s) viol[static_cast<std::size_t>(rows[s].threshold - 1)] += red.y[s] * beta[static_cast<Eigen::Index>(s)];
      for (double v : viol) ok = ok && std::abs(v) <= 1e-9;
    }
    if (ok) {
      std::vector<double> b(beta.data(), beta.data() + m), a, e;
      split(rows, b, a, e);
      const double obj = dual_objective(rows, gram, a, e);
      if (obj > best.objective) {
        best.objective = obj;
        best.alpha = a;
        best.eta = e;
      }
    }
    std::size_t j = 0;
    while (j < m && ++state[j] == 3) state[j++] = 0;
    if (j == m) break;
  }
  return best;
}

/// Decision values f(x_i^(k)) on the training subjects implied by a dual point.
inline Eigen::MatrixXd decisions_from_dual(const std::vector<DuplicatedSample> & rows, const Eigen::MatrixXd & gram,
                                           const std::vector<double> & alpha, const std::vector<double> & eta, int levels)
{
  const Eigen::Index n = gram.rows();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  for (std::size_t s = 0; s < rows.size(); ++s) c[rows[s].base_index] += (alpha[s] - eta[s]) * rows[s].label;
  const Eigen::VectorXd g = gram * c;
  const InterceptFit b = recover_intercepts(as_span(g), rows, levels);
  Eigen::MatrixXd f(n, levels - 1);
  for (int k = 0; k < levels - 1; ++k) f.col(k) = g.array() + b.b[k];
  return f;
}

/// Exhaustive 1-D minimization of the per-threshold intercept loss.
inline double grid_intercept(std::span<const double> g, const std::vector<DuplicatedSample> & rows, int k, double lo,
                             double hi, double step)
{
  double best = std::numeric_limits<double>::infinity(), arg = lo;
  for (double b = lo; b <= hi + 1e-12; b += step) {
    double loss = 0.0;
    for (const auto & r : rows)
      if (r.threshold == k) loss += r.weight * modified_hinge(r.label * (g[static_cast<std::size_t>(r.base_index)] + b), r.reward);
    if (loss < best - 1e-12) {
      best = loss;
      arg = b;
    }
  }
  return arg;
}

/// Random small dataset with mixed-sign rewards.
inline Dataset random_dataset(std::mt19937_64 & rng, Eigen::Index n, Eigen::Index p, int levels, double reward_lo = -2.0,
                              double reward_hi = 2.0)
{
  std::uniform_real_distribution<double> u(-1.0, 1.0), r(reward_lo, reward_hi);
  std::uniform_int_distribution<int> a(1, levels);
  Eigen::MatrixXd x(n, p);
  std::vector<int> t(static_cast<std::size_t>(n));
  Eigen::VectorXd rew(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = u(rng);
    t[static_cast<std::size_t>(i)] = a(rng);
    rew[i] = r(rng);
  }
  return Dataset(x, t, rew, levels, 1.0 / levels);
}

}  // namespace oracle
