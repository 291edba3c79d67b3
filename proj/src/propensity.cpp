#include "ordinal_itr/propensity.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

namespace ordinal_itr {

namespace {

double logistic(double z)
{
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_treatments(const std::vector<int> & a, int levels)
{
  if (levels < 2) throw InvalidArgument("need at least 2 treatment levels");
  for (int v : a)
    if (v < 1 || v > levels)
      throw InvalidArgument("treatment " + std::to_string(v) + " outside 1.." + std::to_string(levels));
}

Eigen::VectorXi level_counts(const std::vector<int> & a, int levels)
{
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(levels);
  for (int v : a) ++counts[v - 1];
  for (int k = 0; k < levels; ++k)
    if (counts[k] == 0) throw InvalidArgument("treatment level " + std::to_string(k + 1) + " is never observed");
  return counts;
}

bool increasing(const Eigen::VectorXd & theta)
{
  for (Eigen::Index k = 1; k < theta.size(); ++k)
    if (!(theta[k] > theta[k - 1])) return false;
  return true;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Cumulative probabilities at the two ends of level a's interval.
std::pair<double, double> interval(const Eigen::VectorXd & theta, int a, double eta)
{
  const int K = static_cast<int>(theta.size()) + 1;
  const double u = a == K ? kInf : theta[a - 1] - eta;
  const double l = a == 1 ? -kInf : theta[a - 2] - eta;
  return {u, l};
}

}  // namespace

std::string to_string(PropensityKind kind)
{
  switch (kind) {
  case PropensityKind::Uniform: return "uniform";
  case PropensityKind::Empirical: return "empirical";
  case PropensityKind::ProportionalOdds: return "proportional_odds";
  }
  return "?";
}

PropensityModel PropensityModel::uniform(int levels)
{
  if (levels < 2) throw InvalidArgument("need at least 2 treatment levels");
  PropensityModel m;
  m.kind_ = PropensityKind::Uniform;
  m.levels_ = levels;
  m.probs_ = Eigen::VectorXd::Constant(levels, 1.0 / levels);
  return m;
}

PropensityModel PropensityModel::empirical(Eigen::VectorXd probabilities)
{
  if (probabilities.size() < 2) throw InvalidArgument("need at least 2 treatment levels");
  for (double p : probabilities)
    if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("empirical propensities must lie in (0, 1]");
  PropensityModel m;
  m.kind_ = PropensityKind::Empirical;
  m.levels_ = static_cast<int>(probabilities.size());
  m.probs_ = std::move(probabilities);
  return m;
}

PropensityModel PropensityModel::proportional_odds(Eigen::VectorXd cutpoints, Eigen::VectorXd gamma)
{
  if (cutpoints.size() < 1) throw InvalidArgument("proportional-odds model needs at least one cutpoint");
  if (!increasing(cutpoints)) throw InvalidArgument("cutpoints must be strictly increasing");
  PropensityModel m;
  m.kind_ = PropensityKind::ProportionalOdds;
  m.levels_ = static_cast<int>(cutpoints.size()) + 1;
  m.theta_ = std::move(cutpoints);
  m.gamma_ = std::move(gamma);
  return m;
}

Eigen::VectorXd PropensityModel::probabilities(std::span<const double> x) const
{
  if (kind_ != PropensityKind::ProportionalOdds) return probs_;
  if (static_cast<Eigen::Index>(x.size()) != gamma_.size())
    throw InvalidArgument("propensity model expects " + std::to_string(gamma_.size()) + " covariates, got " +
                          std::to_string(x.size()));
  double eta = 0.0;
  for (Eigen::Index j = 0; j < gamma_.size(); ++j) eta += x[static_cast<std::size_t>(j)] * gamma_[j];
  Eigen::VectorXd p(levels_);
  double prev = 0.0;
  for (int k = 0; k < levels_ - 1; ++k) {
    const double c = logistic(theta_[k] - eta);
    p[k] = c - prev;
    prev = c;
  }
  p[levels_ - 1] = 1.0 - prev;
  return p;
}

double PropensityModel::probability(std::span<const double> x, int a) const
{
  if (a < 1 || a > levels_) throw InvalidArgument("treatment " + std::to_string(a) + " outside 1.." + std::to_string(levels_));
  return probabilities(x)[a - 1];
}

Eigen::VectorXd PropensityModel::per_row(const Eigen::MatrixXd & x, const std::vector<int> & a, double floor) const
{
  if (static_cast<Eigen::Index>(a.size()) != x.rows()) throw InvalidArgument("covariate and treatment lengths differ");
  check_treatments(a, levels_);
  Eigen::VectorXd out(x.rows());
  Eigen::VectorXd xi(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    xi = x.row(i).transpose();
    out[i] = std::max(probability(as_span(xi), a[static_cast<std::size_t>(i)]), floor);
  }
  return out;
}

PropensityModel empirical_propensity(const std::vector<int> & treatments, int levels)
{
  check_treatments(treatments, levels);
  const Eigen::VectorXi counts = level_counts(treatments, levels);
  return PropensityModel::empirical(counts.cast<double>() / static_cast<double>(treatments.size()));
}

double ordinal_nll(const Eigen::MatrixXd & x, const std::vector<int> & a, int levels, const Eigen::VectorXd & theta,
                   const Eigen::VectorXd & gamma)
{
  if (theta.size() != levels - 1 || gamma.size() != x.cols()) throw InvalidArgument("parameter lengths do not match the data");
  const Eigen::VectorXd eta = x * gamma;
  double nll = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto [u, l] = interval(theta, a[static_cast<std::size_t>(i)], eta[i]);
    const double d = logistic(u) - logistic(l);
    nll -= std::log(std::max(d, std::numeric_limits<double>::min()));
  }
  return nll;
}

PropensityModel fit_proportional_odds(const Eigen::MatrixXd & x, const std::vector<int> & a, int levels,
                                      const OrdinalLogitOptions & options)
{
  const auto n = x.rows();
  const auto p = x.cols();
  if (static_cast<Eigen::Index>(a.size()) != n) throw InvalidArgument("covariate and treatment lengths differ");
  check_treatments(a, levels);
  if (n <= p + levels) throw InvalidArgument("proportional-odds fit needs more than p + K observations");
  const Eigen::VectorXi counts = level_counts(a, levels);

  const int m = levels - 1;
  Eigen::VectorXd theta(m);
  double cum = 0.0;
  for (int k = 0; k < m; ++k) {
    cum += counts[k] / static_cast<double>(n);
    theta[k] = std::log(cum / (1.0 - cum));
  }
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(p);

  PropensityModel model;
  double nll = ordinal_nll(x, a, levels, theta, gamma);
  model.nll_trace.push_back(nll);
  const Eigen::Index dim = m + p;
  for (model.iterations = 0; model.iterations < options.max_iter; ++model.iterations) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(dim, dim);
    const Eigen::VectorXd eta = x * gamma;
    Eigen::VectorXd du(dim), dl(dim);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int ai = a[static_cast<std::size_t>(i)];
      const auto [u, l] = interval(theta, ai, eta[i]);
      const double Fu = logistic(u), Fl = logistic(l);
      const double fu = Fu * (1.0 - Fu), fl = Fl * (1.0 - Fl);
      const double d = std::max(Fu - Fl, std::numeric_limits<double>::min());
      // derivatives of log(F(u) - F(l)) in (u, l)
      const double gu = fu / d, gl = -fl / d;
      const double huu = fu * (1.0 - 2.0 * Fu) / d - gu * gu;
      const double hll = -fl * (1.0 - 2.0 * Fl) / d - gl * gl;
      const double hul = fu * fl / (d * d);
      du.setZero();
      dl.setZero();
      if (ai < levels) {
        du[ai - 1] = 1.0;
        du.tail(p) = -x.row(i).transpose();
      }
      if (ai > 1) {
        dl[ai - 2] = 1.0;
        dl.tail(p) = -x.row(i).transpose();
      }
      grad -= gu * du + gl * dl;
      hess.noalias() -= huu * du * du.transpose() + hll * dl * dl.transpose() +
                        hul * (du * dl.transpose() + dl * du.transpose());
    }
    model.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    if (model.gradient_norm < options.grad_tol) break;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd step = ldlt.solve(-grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite() || step.dot(grad) >= 0.0) step = -grad;

    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      Eigen::VectorXd th = theta + t * step.head(m);
      const Eigen::VectorXd ga = gamma + t * step.tail(p);
      if (!increasing(th)) continue;
      const double trial = ordinal_nll(x, a, levels, th, ga);
      if (trial <= nll) {
        theta = std::move(th);
        gamma = ga;
        nll = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    model.nll_trace.push_back(nll);
  }
  model.separated = nll < 1e-4 || theta.cwiseAbs().maxCoeff() > 100.0 || (p > 0 && gamma.cwiseAbs().maxCoeff() > 100.0);
  model.converged = model.gradient_norm < options.grad_tol && !model.separated;

  if (!increasing(theta)) {
    for (Eigen::Index k = 1; k < theta.size(); ++k) theta[k] = std::max(theta[k], theta[k - 1] + 1e-8);
    model.projected = true;
  }
  PropensityModel out = PropensityModel::proportional_odds(theta, gamma);
  out.converged = model.converged;
  out.iterations = model.iterations;
  out.gradient_norm = model.gradient_norm;
  out.projected = model.projected;
  out.separated = model.separated;
  out.nll_trace = std::move(model.nll_trace);
  return out;
}

}  // namespace ordinal_itr
