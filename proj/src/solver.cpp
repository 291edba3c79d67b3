#include "ordinal_itr/solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace ordinal_itr {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

/// Working copy of the dual problem in effective-label form:
/// min 1/2 beta' Q beta - 1' beta,  Q_st = y_s y_t ktilde_st.
struct SmoProblem
{
  const Eigen::MatrixXd & gram;
  std::vector<Eigen::Index> sub;
  std::vector<int> block;
  std::vector<double> y;
  std::vector<double> ub;
  int blocks = 0;

  SmoProblem(const std::vector<DuplicatedSample> & rows, const Eigen::MatrixXd & g, double C) : gram(g)
  {
    const auto m = rows.size();
    sub.resize(m);
    block.resize(m);
    y.resize(m);
    ub.resize(m);
    for (std::size_t t = 0; t < m; ++t) {
      const auto & r = rows[t];
      if (!(r.weight >= 0.0) || !std::isfinite(r.weight))
        throw InvalidArgument("duplicated row has a negative or non-finite weight");
      if (r.base_index < 0 || r.base_index >= g.rows()) throw InvalidArgument("row refers to a subject outside the Gram matrix");
      sub[t] = r.base_index;
      block[t] = r.threshold - 1;
      y[t] = r.effective_label();
      ub[t] = C * r.weight;
      blocks = std::max(blocks, r.threshold);
    }
  }

  [[nodiscard]] double ktilde(std::size_t s, std::size_t t) const
  {
    return gram(sub[s], sub[t]) + (block[s] == block[t] ? 1.0 : 0.0);
  }

  [[nodiscard]] bool in_up(std::size_t t, double beta) const
  {
    return (y[t] > 0 && beta < ub[t]) || (y[t] < 0 && beta > 0);
  }
  [[nodiscard]] bool in_low(std::size_t t, double beta) const
  {
    return (y[t] > 0 && beta > 0) || (y[t] < 0 && beta < ub[t]);
  }
};

struct BlockState
{
  double gmax = -kInf;
  double gmin = kInf;
  std::size_t i = 0;
};

double objective_from_gradient(const std::vector<double> & beta, const std::vector<double> & grad)
{
  double s = 0.0;
  for (std::size_t t = 0; t < beta.size(); ++t) s += beta[t] * (1.0 - grad[t]);
  return 0.5 * s;
}

}  // namespace

DualSolution solve_dual(const std::vector<DuplicatedSample> & rows,
                        const Eigen::MatrixXd & base_gram,
                        const SolverConfig & config)
{
  if (!(config.C > 0.0) || !(config.kkt_tol > 0.0)) throw InvalidArgument("solver C and tolerance must be positive");
  const SmoProblem pb(rows, base_gram, config.C);
  const std::size_t m = rows.size();
  const std::int64_t max_iter =
      config.max_iter > 0 ? config.max_iter : std::max<std::int64_t>(1000 * static_cast<std::int64_t>(m), 1000);

  std::vector<double> beta(m, 0.0);
  std::vector<double> grad(m, -1.0);
  std::vector<BlockState> st(static_cast<std::size_t>(pb.blocks));
  std::mt19937_64 rng(config.seed);

  DualSolution out;
  out.objective_trace.push_back(0.0);
  const std::int64_t sweep = std::max<std::int64_t>(static_cast<std::int64_t>(m), 1);
  int stalls = 0;

  std::int64_t iter = 0;
  double violation = 0.0;
  for (; iter < max_iter; ++iter) {
    std::fill(st.begin(), st.end(), BlockState{});
    for (std::size_t t = 0; t < m; ++t) {
      auto & b = st[static_cast<std::size_t>(pb.block[t])];
      const double v = -pb.y[t] * grad[t];
      if (pb.in_up(t, beta[t]) && v > b.gmax) {
        b.gmax = v;
        b.i = t;
      }
      if (pb.in_low(t, beta[t]) && v < b.gmin) b.gmin = v;
    }
    int worst = -1;
    violation = 0.0;
    for (std::size_t k = 0; k < st.size(); ++k) {
      const double gap = st[k].gmax - st[k].gmin;
      if (std::isfinite(gap) && gap > violation) {
        violation = gap;
        worst = static_cast<int>(k);
      }
    }
    if (worst < 0 || violation < config.kkt_tol) {
      out.converged = true;
      break;
    }

    const std::size_t i = st[static_cast<std::size_t>(worst)].i;
    const double gmax = st[static_cast<std::size_t>(worst)].gmax;
    const double kii = pb.ktilde(i, i);

    // second-order choice of j among I_low in the same block
    std::size_t j = m;
    double best = kInf;
    for (std::size_t t = 0; t < m; ++t) {
      if (pb.block[t] != worst || !pb.in_low(t, beta[t])) continue;
      const double diff = gmax + pb.y[t] * grad[t];
      if (diff <= 0.0) continue;
      double quad = kii + pb.ktilde(t, t) - 2.0 * pb.ktilde(i, t);
      if (quad <= 0.0) quad = kTau;
      const double score = -diff * diff / quad;
      if (score < best) {
        best = score;
        j = t;
      }
    }
    if (j == m) break;

    const double ci = pb.ub[i], cj = pb.ub[j];
    const double yi = pb.y[i], yj = pb.y[j];
    const double qij = yi * yj * pb.ktilde(i, j);
    const double qii = kii, qjj = pb.ktilde(j, j);
    const double old_i = beta[i], old_j = beta[j];
    double & ai = beta[i];
    double & aj = beta[j];

    if (yi != yj) {
      double quad = qii + qjj + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) {
          aj = 0;
          ai = diff;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = -diff;
      }
      if (diff > ci - cj) {
        if (ai > ci) {
          ai = ci;
          aj = ci - diff;
        }
      } else if (aj > cj) {
        aj = cj;
        ai = cj + diff;
      }
    } else {
      double quad = qii + qjj - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > ci) {
        if (ai > ci) {
          ai = ci;
          aj = sum - ci;
        }
      } else if (aj < 0) {
        aj = 0;
        ai = sum;
      }
      if (sum > cj) {
        if (aj > cj) {
          aj = cj;
          ai = sum - cj;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = sum;
      }
    }

    const double di = ai - old_i, dj = aj - old_j;
    if (di == 0.0 && dj == 0.0) {
      // no progress on the greedy pair: nudge with a random partner from the block
      if (++stalls > 100) break;
      std::vector<std::size_t> cand;
      for (std::size_t t = 0; t < m; ++t)
        if (pb.block[t] == worst && t != i && pb.in_low(t, beta[t])) cand.push_back(t);
      if (cand.empty()) break;
      const std::size_t r = cand[std::uniform_int_distribution<std::size_t>(0, cand.size() - 1)(rng)];
      const double q = std::max(qii + pb.ktilde(r, r) - 2.0 * pb.ktilde(i, r), kTau);
      const double step_dir_i = yi, step_dir_r = -pb.y[r];  // keeps y_i d_i + y_r d_r = 0
      const double slope = -(grad[i] * step_dir_i + grad[r] * step_dir_r);
      double step = slope / q;
      step = std::clamp(step, 0.0, kInf);
      const auto cap = [&](std::size_t t, double dir) {
        return dir > 0 ? (pb.ub[t] - beta[t]) : beta[t];
      };
      step = std::min({step, cap(i, step_dir_i), cap(r, step_dir_r)});
      if (step <= 0.0) continue;
      beta[i] += step * step_dir_i;
      beta[r] += step * step_dir_r;
      for (std::size_t t = 0; t < m; ++t)
        grad[t] += pb.y[t] * (pb.y[i] * pb.ktilde(t, i) * step * step_dir_i + pb.y[r] * pb.ktilde(t, r) * step * step_dir_r);
      continue;
    }

    const auto col_i = pb.sub[i], col_j = pb.sub[j];
    const int bi = pb.block[i], bj = pb.block[j];
    const double si = yi * di, sj = yj * dj;
    for (std::size_t t = 0; t < m; ++t) {
      const double kti = base_gram(pb.sub[t], col_i) + (pb.block[t] == bi ? 1.0 : 0.0);
      const double ktj = base_gram(pb.sub[t], col_j) + (pb.block[t] == bj ? 1.0 : 0.0);
      grad[t] += pb.y[t] * (kti * si + ktj * sj);
    }

    if ((iter + 1) % sweep == 0) out.objective_trace.push_back(objective_from_gradient(beta, grad));
  }

  // refresh the gradient to shed accumulated rounding before reporting
  {
    Eigen::VectorXd v(static_cast<Eigen::Index>(m));
    for (std::size_t t = 0; t < m; ++t) v[static_cast<Eigen::Index>(t)] = pb.y[t] * beta[t];
    for (std::size_t s = 0; s < m; ++s) {
      double acc = 0.0;
      for (std::size_t t = 0; t < m; ++t) acc += pb.ktilde(s, t) * v[static_cast<Eigen::Index>(t)];
      grad[s] = pb.y[s] * acc - 1.0;
    }
    std::fill(st.begin(), st.end(), BlockState{});
    for (std::size_t t = 0; t < m; ++t) {
      auto & b = st[static_cast<std::size_t>(pb.block[t])];
      const double val = -pb.y[t] * grad[t];
      if (pb.in_up(t, beta[t]) && val > b.gmax) b.gmax = val;
      if (pb.in_low(t, beta[t]) && val < b.gmin) b.gmin = val;
    }
    violation = 0.0;
    for (const auto & b : st)
      if (std::isfinite(b.gmax - b.gmin)) violation = std::max(violation, b.gmax - b.gmin);
  }

  out.alpha.assign(m, 0.0);
  out.eta.assign(m, 0.0);
  for (std::size_t t = 0; t < m; ++t) (rows[t].nonnegative_reward() ? out.alpha : out.eta)[t] = beta[t];
  out.dual_objective = objective_from_gradient(beta, grad);
  out.objective_trace.push_back(out.dual_objective);
  out.kkt_violation = violation;
  out.iterations = iter;
  out.converged = violation < config.kkt_tol;
  return out;
}

double dual_objective(const std::vector<DuplicatedSample> & rows,
                      const Eigen::MatrixXd & base_gram,
                      std::span<const double> alpha,
                      std::span<const double> eta)
{
  const std::size_t m = rows.size();
  if (alpha.size() != m || eta.size() != m) throw InvalidArgument("dual_objective: multiplier length mismatch");
  double linear = 0.0;
  for (std::size_t t = 0; t < m; ++t) linear += alpha[t] + eta[t];
  double quad = 0.0;
  for (std::size_t s = 0; s < m; ++s) {
    const double vs = (alpha[s] - eta[s]) * rows[s].label;
    if (vs == 0.0) continue;
    for (std::size_t t = 0; t < m; ++t) {
      const double vt = (alpha[t] - eta[t]) * rows[t].label;
      const double k = base_gram(rows[s].base_index, rows[t].base_index) +
                       (rows[s].threshold == rows[t].threshold ? 1.0 : 0.0);
      quad += vs * vt * k;
    }
  }
  return linear - 0.5 * quad;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> dual_gradient(const std::vector<DuplicatedSample> & rows,
                                                          const Eigen::MatrixXd & base_gram,
                                                          std::span<const double> alpha,
                                                          std::span<const double> eta)
{
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd kv = Eigen::VectorXd::Zero(m);
  for (Eigen::Index s = 0; s < m; ++s) {
    const auto & rs = rows[static_cast<std::size_t>(s)];
    for (Eigen::Index t = 0; t < m; ++t) {
      const auto & rt = rows[static_cast<std::size_t>(t)];
      const double vt = (alpha[static_cast<std::size_t>(t)] - eta[static_cast<std::size_t>(t)]) * rt.label;
      kv[s] += (base_gram(rs.base_index, rt.base_index) + (rs.threshold == rt.threshold ? 1.0 : 0.0)) * vt;
    }
  }
  Eigen::VectorXd ga(m), ge(m);
  for (Eigen::Index s = 0; s < m; ++s) {
    const double a = rows[static_cast<std::size_t>(s)].label;
    ga[s] = 1.0 - a * kv[s];
    ge[s] = 1.0 + a * kv[s];
  }
  return {ga, ge};
}

Eigen::VectorXd recover_slope_linear(const DualSolution & dual,
                                     const std::vector<DuplicatedSample> & rows,
                                     const Dataset & data)
{
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(data.dim());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const double v = dual.net(t) * rows[t].label;
    if (v != 0.0) beta += v * data.covariates().row(rows[t].base_index).transpose();
  }
  return beta;
}

Eigen::VectorXd recover_coeffs_kernel(const DualSolution & dual,
                                      const std::vector<DuplicatedSample> & rows,
                                      Eigen::Index subjects)
{
  Eigen::VectorXd c = Eigen::VectorXd::Zero(subjects);
  for (std::size_t t = 0; t < rows.size(); ++t) c[rows[t].base_index] += dual.net(t) * rows[t].label;
  return c;
}

InterceptFit recover_intercepts(std::span<const double> g_values,
                                const std::vector<DuplicatedSample> & rows,
                                int levels)
{
  if (levels < 2) throw InvalidArgument("recover_intercepts needs K >= 2");
  double gmax = 0.0;
  for (double g : g_values) {
    if (!std::isfinite(g)) throw InvalidArgument("recover_intercepts: non-finite score");
    gmax = std::max(gmax, std::abs(g));
  }
  const double clip = gmax + 1.0;

  InterceptFit out{Eigen::VectorXd::Zero(levels - 1), std::vector<bool>(static_cast<std::size_t>(levels - 1), false)};

  // Each term w [1 - y (g + b)]_+ has its kink at b = y - g and raises the
  // slope in b by w there (from -w to 0 when y = +1, from 0 to +w when y = -1).
  struct Kink
  {
    double at;
    double w;
  };
  for (int k = 1; k < levels; ++k) {
    std::vector<Kink> kinks;
    double slope = 0.0;
    double total = 0.0;
    for (const auto & r : rows) {
      if (r.threshold != k || r.weight <= 0.0) continue;
      const double g = g_values[static_cast<std::size_t>(r.base_index)];
      const int y = r.effective_label();
      kinks.push_back({y - g, r.weight});
      if (y > 0) slope -= r.weight;
      total += r.weight;
    }
    if (kinks.empty()) {
      out.degenerate[static_cast<std::size_t>(k - 1)] = true;
      continue;
    }
    std::sort(kinks.begin(), kinks.end(), [](const Kink & a, const Kink & b) { return a.at < b.at; });
    const double eps = 1e-12 * total;

    double lo = -clip, hi = clip;
    if (slope >= -eps) {
      // non-decreasing from the start: every b up to the first kink is optimal
      hi = kinks.front().at;
    } else {
      for (std::size_t q = 0; q < kinks.size(); ++q) {
        slope += kinks[q].w;
        // merge kinks at the same location
        while (q + 1 < kinks.size() && kinks[q + 1].at == kinks[q].at) slope += kinks[++q].w;
        if (slope > eps) {
          lo = hi = kinks[q].at;
          break;
        }
        if (slope >= -eps) {
          lo = kinks[q].at;
          hi = q + 1 < kinks.size() ? kinks[q + 1].at : clip;
          break;
        }
      }
    }
    lo = std::clamp(lo, -clip, clip);
    hi = std::clamp(hi, -clip, clip);
    out.b[k - 1] = 0.5 * (lo + hi);
  }
  return out;
}

Eigen::VectorXd isotonic_nonincreasing(const Eigen::VectorXd & b)
{
  // PAVA on the reversed sequence (non-decreasing there)
  std::vector<double> val;
  std::vector<int> cnt;
  for (Eigen::Index i = b.size() - 1; i >= 0; --i) {
    val.push_back(b[i]);
    cnt.push_back(1);
    while (val.size() > 1 && val[val.size() - 2] > val.back()) {
      const double merged = (val[val.size() - 2] * cnt[cnt.size() - 2] + val.back() * cnt.back()) /
                            (cnt[cnt.size() - 2] + cnt.back());
      const int c = cnt[cnt.size() - 2] + cnt.back();
      val.pop_back();
      cnt.pop_back();
      val.back() = merged;
      cnt.back() = c;
    }
  }
  Eigen::VectorXd out(b.size());
  Eigen::Index pos = b.size() - 1;
  for (std::size_t blk = 0; blk < val.size(); ++blk)
    for (int c = 0; c < cnt[blk]; ++c) out[pos--] = val[blk];
  return out;
}

FittedRule FittedRule::linear(Eigen::VectorXd beta, Eigen::VectorXd intercepts)
{
  FittedRule r;
  r.kind_ = RuleKind::Linear;
  r.spec_ = KernelSpec::linear();
  r.beta_ = std::move(beta);
  r.b_ = std::move(intercepts);
  if (r.b_.size() < 1) throw InvalidArgument("rule needs at least one intercept");
  return r;
}

FittedRule FittedRule::kernel(KernelSpec spec, Eigen::MatrixXd support, Eigen::VectorXd coeffs, Eigen::VectorXd intercepts)
{
  spec.validate();
  if (support.rows() != coeffs.size()) throw InvalidArgument("support and coefficient counts differ");
  FittedRule r;
  r.kind_ = RuleKind::Kernel;
  r.spec_ = spec;
  r.support_ = std::move(support);
  r.coeffs_ = std::move(coeffs);
  r.b_ = std::move(intercepts);
  if (r.b_.size() < 1) throw InvalidArgument("rule needs at least one intercept");
  return r;
}

double FittedRule::score(std::span<const double> x) const
{
  check_dim(x);
  if (kind_ == RuleKind::Linear) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < beta_.size(); ++j) s += beta_[j] * x[static_cast<std::size_t>(j)];
    return s;
  }
  double s = 0.0;
  for (Eigen::Index j = 0; j < support_.rows(); ++j) {
    if (coeffs_[j] == 0.0) continue;
    const Eigen::VectorXd sj = support_.row(j).transpose();
    s += coeffs_[j] * spec_(x, as_span(sj));
  }
  return s;
}

Eigen::VectorXd FittedRule::scores(const Eigen::MatrixXd & x) const
{
  if (x.cols() != dim()) throw InvalidArgument("rule expects " + std::to_string(dim()) + " covariates");
  if (kind_ == RuleKind::Linear) return x * beta_;
  return kernel_matrix(spec_, x, support_) * coeffs_;
}

Eigen::VectorXd FittedRule::decision_values(std::span<const double> x) const
{
  return (Eigen::VectorXd::Constant(b_.size(), score(x)) + b_).eval();
}

Eigen::MatrixXd FittedRule::decision_matrix(const Eigen::MatrixXd & x) const
{
  const Eigen::VectorXd g = scores(x);
  Eigen::MatrixXd f = g.replicate(1, b_.size());
  f.rowwise() += b_.transpose();
  return f;
}

double FittedRule::norm_squared() const
{
  if (kind_ == RuleKind::Linear) return beta_.squaredNorm();
  return coeffs_.dot(kernel_matrix(spec_, support_, support_) * coeffs_);
}

Eigen::MatrixXd subject_gram(const KernelSpec & spec, const Eigen::MatrixXd & x)
{
  Eigen::MatrixXd g = kernel_matrix(spec, x, x);
  if (g.rows() <= 2000) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8) g.diagonal().array() += 1e-10;
  }
  return g;
}

FittedRule fit_rows(const Dataset & data, const std::vector<DuplicatedSample> & rows, double lambda,
                    const KernelSpec & spec, const FitOptions & options, const Eigen::MatrixXd * gram,
                    DualSolution * dual_out)
{
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be positive and finite");
  spec.validate();
  const double C = 1.0 / (2.0 * lambda);

  Eigen::MatrixXd own;
  if (gram == nullptr) {
    own = subject_gram(spec, data.covariates());
    gram = &own;
  }
  SolverConfig cfg;
  cfg.C = C;
  cfg.kkt_tol = options.kkt_tol;
  cfg.max_iter = options.max_iter;
  cfg.seed = options.seed;
  DualSolution dual = solve_dual(rows, *gram, cfg);

  Eigen::VectorXd g;
  FittedRule rule;
  const int K = data.levels();
  if (spec.type == KernelType::Linear) {
    const Eigen::VectorXd beta = recover_slope_linear(dual, rows, data);
    g = data.covariates() * beta;
    rule = FittedRule::linear(beta, Eigen::VectorXd::Zero(K - 1));
  } else {
    const Eigen::VectorXd c = recover_coeffs_kernel(dual, rows, data.size());
    g = *gram * c;
    rule = FittedRule::kernel(spec, data.covariates(), c, Eigen::VectorXd::Zero(K - 1));
  }
  InterceptFit ic = recover_intercepts(as_span(g), rows, K);
  Eigen::VectorXd b = options.isotonic ? isotonic_nonincreasing(ic.b) : ic.b;
  if (spec.type == KernelType::Linear)
    rule = FittedRule::linear(rule.beta(), std::move(b));
  else
    rule = FittedRule::kernel(spec, rule.support(), rule.coeffs(), std::move(b));

  rule.lambda = lambda;
  rule.C = C;
  rule.kkt_violation = dual.kkt_violation;
  rule.converged = dual.converged;
  rule.dual_objective = dual.dual_objective;
  if (dual_out != nullptr) *dual_out = std::move(dual);
  return rule;
}

FittedRule fit(const Dataset & data, double lambda, const KernelSpec & spec, const FitOptions & options)
{
  return fit_rows(data, duplicate(data, options.strategy), lambda, spec, options);
}

double primal_objective(const FittedRule & rule, const Dataset & data, const std::vector<DuplicatedSample> & rows)
{
  const Eigen::VectorXd g = rule.scores(data.covariates());
  double loss = 0.0;
  for (const auto & r : rows) {
    const double f = g[r.base_index] + rule.intercepts()[r.threshold - 1];
    loss += r.weight * modified_hinge(r.label * f, r.reward);
  }
  return 0.5 * rule.norm_squared() + rule.C * loss;
}

}  // namespace ordinal_itr
