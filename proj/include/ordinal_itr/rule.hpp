#pragma once

#include "ordinal_itr/core.hpp"

#include <functional>

namespace ordinal_itr {

/**
 * @brief A treatment rule expressed through K-1 per-threshold decisions.
 *
 * The recommended level is the number of positive decision values plus one.
 * Value estimation compares these per-threshold decisions against the
 * duplicated labels sign(a - k), so rules expose them directly.
 */
class Rule
{
public:
  virtual ~Rule() = default;

  [[nodiscard]] virtual int levels() const = 0;
  [[nodiscard]] virtual Eigen::Index dim() const = 0;

  /// f(x^(k)) for k = 1..K-1.
  [[nodiscard]] virtual Eigen::VectorXd decision_values(std::span<const double> x) const = 0;

  /// One row of decision values per row of x. Override when batching is cheaper.
  [[nodiscard]] virtual Eigen::MatrixXd decision_matrix(const Eigen::MatrixXd & x) const;

  [[nodiscard]] int predict(std::span<const double> x) const;
  [[nodiscard]] std::vector<int> predict(const Eigen::MatrixXd & x) const;

protected:
  void check_dim(std::span<const double> x) const;
};

/// Level count from a row of decision values.
int level_from_decisions(const Eigen::Ref<const Eigen::VectorXd> & f);

/**
 * Rule defined by a treatment map; its per-threshold decisions form the
 * staircase sign(d(x) - k). Used for known optimal rules and fixed policies.
 */
class TreatmentMapRule final : public Rule
{
public:
  using Map = std::function<int(std::span<const double>)>;

  TreatmentMapRule(int levels, Eigen::Index dim, Map map);

  [[nodiscard]] int levels() const override { return levels_; }
  [[nodiscard]] Eigen::Index dim() const override { return dim_; }
  [[nodiscard]] Eigen::VectorXd decision_values(std::span<const double> x) const override;

private:
  int levels_;
  Eigen::Index dim_;
  Map map_;
};

}  // namespace ordinal_itr
