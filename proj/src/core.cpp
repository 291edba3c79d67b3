#include "ordinal_itr/core.hpp"

#include <cmath>
#include <string>

namespace ordinal_itr {

Dataset::Dataset(Eigen::MatrixXd covariates,
                 std::vector<int> treatments,
                 Eigen::VectorXd rewards,
                 Eigen::VectorXd propensity,
                 int levels)
    : x_(std::move(covariates)), a_(std::move(treatments)), r_(std::move(rewards)), pi_(std::move(propensity)),
      levels_(levels)
{
  validate();
}

Dataset::Dataset(Eigen::MatrixXd covariates, std::vector<int> treatments, Eigen::VectorXd rewards, int levels,
                 double propensity)
    : Dataset(covariates, std::move(treatments), std::move(rewards),
              Eigen::VectorXd::Constant(covariates.rows(), propensity), levels)
{}

void Dataset::validate() const
{
  const auto n = x_.rows();
  if (levels_ < 2) throw InvalidArgument("dataset needs at least 2 treatment levels, got " + std::to_string(levels_));
  if (n < 1) throw InvalidArgument("dataset is empty");
  if (x_.cols() < 1) throw InvalidArgument("dataset has no covariates");
  if (static_cast<Eigen::Index>(a_.size()) != n || r_.size() != n || pi_.size() != n)
    throw InvalidArgument("dataset columns have inconsistent lengths");
  if (!x_.allFinite()) throw InvalidArgument("covariates contain NaN or Inf");
  if (!r_.allFinite()) throw InvalidArgument("rewards contain NaN or Inf");
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = a_[static_cast<std::size_t>(i)];
    if (a < 1 || a > levels_)
      throw InvalidArgument("treatment " + std::to_string(a) + " at row " + std::to_string(i + 1) +
                            " is outside 1.." + std::to_string(levels_));
    if (!(pi_[i] > 0.0 && pi_[i] <= 1.0))
      throw InvalidArgument("propensity at row " + std::to_string(i + 1) + " is outside (0,1]");
  }
}

Dataset Dataset::subset(std::span<const Eigen::Index> rows) const
{
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(m, x_.cols());
  std::vector<int> a(rows.size());
  Eigen::VectorXd r(m), pi(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto i = rows[static_cast<std::size_t>(j)];
    x.row(j) = x_.row(i);
    a[static_cast<std::size_t>(j)] = a_[static_cast<std::size_t>(i)];
    r[j] = r_[i];
    pi[j] = pi_[i];
  }
  return Dataset(std::move(x), std::move(a), std::move(r), std::move(pi), levels_);
}

Dataset Dataset::with_rewards(Eigen::VectorXd rewards) const
{
  return Dataset(x_, a_, std::move(rewards), pi_, levels_);
}

Dataset Dataset::with_propensity(Eigen::VectorXd propensity) const
{
  return Dataset(x_, a_, r_, std::move(propensity), levels_);
}

void KernelSpec::validate() const
{
  if (type == KernelType::Gaussian && !(std::isfinite(sigma) && sigma > 0.0))
    throw InvalidArgument("gaussian kernel bandwidth must be finite and positive");
}

double KernelSpec::operator()(std::span<const double> x, std::span<const double> y) const
{
  if (x.size() != y.size()) throw InvalidArgument("kernel arguments have different lengths");
  if (type == KernelType::Linear) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    d2 += d * d;
  }
  return std::exp(-d2 / (2.0 * sigma * sigma));
}

std::string to_string(KernelType type)
{
  return type == KernelType::Linear ? "linear" : "gaussian";
}

KernelType kernel_type_from_string(const std::string & name)
{
  if (name == "linear") return KernelType::Linear;
  if (name == "gaussian") return KernelType::Gaussian;
  throw InvalidArgument("unknown kernel '" + name + "' (expected linear or gaussian)");
}

Eigen::MatrixXd kernel_matrix(const KernelSpec & spec, const Eigen::MatrixXd & a, const Eigen::MatrixXd & b)
{
  spec.validate();
  if (a.cols() != b.cols()) throw InvalidArgument("kernel_matrix: dimension mismatch");
  if (spec.type == KernelType::Linear) return a * b.transpose();

  // |x-y|^2 = |x|^2 + |y|^2 - 2 x.y, clamped at zero against rounding
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd k = -2.0 * (a * b.transpose());
  k.colwise() += na;
  k.rowwise() += nb.transpose();
  const double scale = -1.0 / (2.0 * spec.sigma * spec.sigma);
  return (k.array().max(0.0) * scale).exp().matrix();
}

int sign_of(double u)
{
  if (!std::isfinite(u)) throw InvalidArgument("sign of a non-finite value");
  return u > 0.0 ? 1 : -1;
}

double modified_hinge(double u, double r)
{
  if (!std::isfinite(u) || !std::isfinite(r)) throw InvalidArgument("modified_hinge needs finite inputs");
  return r >= 0.0 ? std::max(0.0, 1.0 - u) : std::max(0.0, 1.0 + u);
}

}  // namespace ordinal_itr
