#include "ordinal_itr/baselines.hpp"

#include <cmath>

namespace ordinal_itr {

BaselineRule::BaselineRule(BaselineMethod method, std::vector<FittedRule> subrules, double shift)
    : method_(method), subrules_(std::move(subrules)), shift_(shift)
{
  if (subrules_.empty()) throw InvalidArgument("baseline rule needs at least one sub-rule");
  for (const auto & s : subrules_) {
    if (s.levels() != 2) throw InvalidArgument("baseline sub-rules must be binary");
    if (s.dim() != subrules_.front().dim()) throw InvalidArgument("baseline sub-rules disagree on dimension");
  }
}

Eigen::VectorXd BaselineRule::decision_values(std::span<const double> x) const
{
  check_dim(x);
  Eigen::VectorXd f(static_cast<Eigen::Index>(subrules_.size()));
  for (std::size_t k = 0; k < subrules_.size(); ++k) f[static_cast<Eigen::Index>(k)] = subrules_[k].decision_values(x)[0];
  return f;
}

Eigen::MatrixXd BaselineRule::decision_matrix(const Eigen::MatrixXd & x) const
{
  Eigen::MatrixXd f(x.rows(), static_cast<Eigen::Index>(subrules_.size()));
  for (std::size_t k = 0; k < subrules_.size(); ++k) f.col(static_cast<Eigen::Index>(k)) = subrules_[k].decision_matrix(x).col(0);
  return f;
}

namespace {

double sample_sd(const Eigen::VectorXd & v)
{
  if (v.size() < 2) return 0.0;
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

/// Treatments collapsed to {1, 2} for the comparison {1..k} vs {k+1..K}.
std::vector<int> split_at(const std::vector<int> & a, int k)
{
  std::vector<int> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] > k ? 2 : 1;
  return out;
}

}  // namespace

double owl_shift(const Eigen::VectorXd & rewards, const OwlOptions & options)
{
  if (options.shift) return *options.shift;
  return -rewards.minCoeff() + options.margin * sample_sd(rewards);
}

BaselineRule fit_owl(const Dataset & data, double lambda, const KernelSpec & spec, const OwlOptions & options)
{
  const double shift = owl_shift(data.rewards(), options);
  const Eigen::VectorXd shifted = data.rewards().array() + shift;
  const Eigen::MatrixXd gram = subject_gram(spec, data.covariates());
  std::vector<FittedRule> subs;
  for (int k = 1; k < data.levels(); ++k) {
    const Dataset binary(data.covariates(), split_at(data.treatments(), k), shifted, data.propensity(), 2);
    FitOptions fo = options.fit;
    fo.strategy = Strategy::Full;
    subs.push_back(fit_rows(binary, duplicate(binary), lambda, spec, fo, &gram));
  }
  return BaselineRule(BaselineMethod::Owl, std::move(subs), shift);
}

LassoFit lasso(const Eigen::MatrixXd & x, const Eigen::VectorXd & y, double lambda, double tol, int max_cycles)
{
  const auto n = x.rows();
  const auto p = x.cols();
  if (n != y.size()) throw InvalidArgument("lasso: design and response lengths differ");
  if (n < 2) throw InvalidArgument("lasso needs at least 2 observations");
  if (!(lambda >= 0.0)) throw InvalidArgument("lasso penalty must be non-negative");

  const Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd z = x.rowwise() - mean;
  Eigen::VectorXd scale(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double sd = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(n));
    scale[j] = sd > 1e-12 ? sd : 0.0;
    if (scale[j] > 0.0) z.col(j) /= scale[j];
  }
  const double ymean = y.mean();
  Eigen::VectorXd resid = y.array() - ymean;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  const double nd = static_cast<double>(n);

  const auto objective = [&] { return resid.squaredNorm() / (2.0 * nd) + lambda * beta.lpNorm<1>(); };
  const auto soft = [](double v, double t) { return v > t ? v - t : (v < -t ? v + t : 0.0); };

  LassoFit out;
  for (out.cycles = 0; out.cycles < max_cycles;) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (scale[j] == 0.0) continue;
      const double old = beta[j];
      // columns have unit mean square, so the coordinate minimizer needs no rescaling
      const double rho = z.col(j).dot(resid) / nd + old;
      const double updated = soft(rho, lambda);
      if (updated != old) {
        resid -= (updated - old) * z.col(j);
        beta[j] = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    ++out.cycles;
    out.objective_trace.push_back(objective());
    if (max_change < tol) {
      out.converged = true;
      break;
    }
  }

  out.coef = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 0; j < p; ++j)
    if (scale[j] > 0.0) out.coef[j] = beta[j] / scale[j];
  out.intercept = ymean - mean.dot(out.coef);
  return out;
}

BaselineRule fit_pls_l1(const Dataset & data, double lambda_lasso)
{
  const auto n = data.size();
  const auto p = data.dim();
  if (n <= 2) throw InvalidArgument("PLS-l1 needs more than 2 observations");
  std::vector<FittedRule> subs;
  Eigen::MatrixXd design(n, 2 * p + 1);
  design.leftCols(p) = data.covariates();
  for (int k = 1; k < data.levels(); ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = sign_of(static_cast<double>(data.treatment(i) - k));
      design(i, p) = t;
      design.row(i).tail(p) = t * data.covariates().row(i);
    }
    const LassoFit lf = lasso(design, data.rewards(), lambda_lasso);
    FittedRule sub = FittedRule::linear(lf.coef.tail(p), Eigen::VectorXd::Constant(1, lf.coef[p]));
    sub.lambda = lambda_lasso;
    sub.converged = lf.converged;
    subs.push_back(std::move(sub));
  }
  return BaselineRule(BaselineMethod::PlsL1, std::move(subs));
}

}  // namespace ordinal_itr
