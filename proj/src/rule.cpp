#include "ordinal_itr/rule.hpp"

#include <string>

namespace ordinal_itr {

Eigen::MatrixXd Rule::decision_matrix(const Eigen::MatrixXd & x) const
{
  Eigen::MatrixXd out(x.rows(), levels() - 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd xi = x.row(i).transpose();
    out.row(i) = decision_values(as_span(xi)).transpose();
  }
  return out;
}

int Rule::predict(std::span<const double> x) const
{
  return level_from_decisions(decision_values(x));
}

std::vector<int> Rule::predict(const Eigen::MatrixXd & x) const
{
  const Eigen::MatrixXd f = decision_matrix(x);
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = level_from_decisions(f.row(i).transpose());
  return out;
}

void Rule::check_dim(std::span<const double> x) const
{
  if (static_cast<Eigen::Index>(x.size()) != dim())
    throw InvalidArgument("rule expects " + std::to_string(dim()) + " covariates, got " + std::to_string(x.size()));
}

int level_from_decisions(const Eigen::Ref<const Eigen::VectorXd> & f)
{
  int level = 1;
  for (Eigen::Index k = 0; k < f.size(); ++k)
    if (f[k] > 0.0) ++level;
  return level;
}

TreatmentMapRule::TreatmentMapRule(int levels, Eigen::Index dim, Map map)
    : levels_(levels), dim_(dim), map_(std::move(map))
{
  if (levels < 2) throw InvalidArgument("rule needs at least 2 levels");
}

Eigen::VectorXd TreatmentMapRule::decision_values(std::span<const double> x) const
{
  check_dim(x);
  const int d = map_(x);
  if (d < 1 || d > levels_) throw InvalidArgument("treatment map returned level " + std::to_string(d));
  Eigen::VectorXd f(levels_ - 1);
  for (int k = 1; k < levels_; ++k) f[k - 1] = d > k ? 1.0 : -1.0;
  return f;
}

}  // namespace ordinal_itr
