#include "ordinal_itr/duplication.hpp"

#include <cmath>

namespace ordinal_itr {

std::string to_string(Strategy s)
{
  return s == Strategy::Full ? "full" : "partial";
}

Strategy strategy_from_string(const std::string & name)
{
  if (name == "full") return Strategy::Full;
  if (name == "partial") return Strategy::Partial;
  throw InvalidArgument("unknown duplication strategy '" + name + "' (expected full or partial)");
}

namespace {

std::vector<DuplicatedSample> build(const Dataset & data, bool partial)
{
  const int K = data.levels();
  if (K < 2) throw InvalidArgument("duplication needs K >= 2");
  std::vector<DuplicatedSample> rows;
  rows.reserve(static_cast<std::size_t>(data.size()) * static_cast<std::size_t>(K - 1));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const int a = data.treatment(i);
    const double pi = data.propensity()[i];
    for (int k = 1; k < K; ++k) {
      double r = data.reward(i);
      if (partial) {
        if (a != k && a != k + 1) r = 0.0;
        if (r == 0.0) continue;
      }
      rows.push_back({i, k, sign_of(static_cast<double>(a - k)), r, std::abs(r) / pi});
    }
  }
  return rows;
}

}  // namespace

std::vector<DuplicatedSample> duplicate(const Dataset & data)
{
  return build(data, false);
}

std::vector<DuplicatedSample> duplicate_partial(const Dataset & data)
{
  return build(data, true);
}

std::vector<DuplicatedSample> duplicate(const Dataset & data, Strategy strategy)
{
  return build(data, strategy == Strategy::Partial);
}

double extended_kernel(const KernelSpec & spec, std::span<const double> xi, int k, std::span<const double> xj, int h)
{
  spec.validate();
  if (k < 1 || h < 1) throw InvalidArgument("extended_kernel: thresholds are 1-based");
  return spec(xi, xj) + (k == h ? 1.0 : 0.0);
}

Eigen::MatrixXd extended_gram(const KernelSpec & spec, const Eigen::MatrixXd & x,
                              const std::vector<DuplicatedSample> & rows)
{
  const Eigen::MatrixXd base = kernel_matrix(spec, x, x);
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index s = 0; s < m; ++s) {
    const auto & rs = rows[static_cast<std::size_t>(s)];
    for (Eigen::Index t = 0; t < m; ++t) {
      const auto & rt = rows[static_cast<std::size_t>(t)];
      g(s, t) = base(rs.base_index, rt.base_index) + (rs.threshold == rt.threshold ? 1.0 : 0.0);
    }
  }
  return g;
}

}  // namespace ordinal_itr
