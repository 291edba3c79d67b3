#pragma once

/**
 * @file
 * @brief Comparison methods adapted to ordinal treatments by K-1 pairwise
 * comparisons of {1..k} against {k+1..K}. The recommended level is the number
 * of sub-rules voting for the upper group plus one.
 */

#include "ordinal_itr/solver.hpp"

#include <optional>

namespace ordinal_itr {

enum class BaselineMethod { Owl, PlsL1 };

class BaselineRule final : public Rule
{
public:
  BaselineRule(BaselineMethod method, std::vector<FittedRule> subrules, double shift = 0.0);

  [[nodiscard]] int levels() const override { return static_cast<int>(subrules_.size()) + 1; }
  [[nodiscard]] Eigen::Index dim() const override { return subrules_.front().dim(); }
  [[nodiscard]] Eigen::VectorXd decision_values(std::span<const double> x) const override;
  [[nodiscard]] Eigen::MatrixXd decision_matrix(const Eigen::MatrixXd & x) const override;

  [[nodiscard]] BaselineMethod method() const noexcept { return method_; }
  [[nodiscard]] const std::vector<FittedRule> & subrules() const noexcept { return subrules_; }
  /// Constant added to the rewards before fitting (OWL only).
  [[nodiscard]] double shift() const noexcept { return shift_; }

private:
  BaselineMethod method_;
  std::vector<FittedRule> subrules_;
  double shift_;
};

struct OwlOptions
{
  /// Explicit constant c with r' = r + c. When unset, c = -min(r) + margin * sd(r).
  std::optional<double> shift;
  double margin = 0.1;
  FitOptions fit;
};

/// The shift constant fit_owl applies to these rewards.
double owl_shift(const Eigen::VectorXd & rewards, const OwlOptions & options);

/// Pairwise weighted-hinge OWL on shifted rewards, weights r'/π.
BaselineRule fit_owl(const Dataset & data, double lambda, const KernelSpec & spec, const OwlOptions & options = {});

struct LassoFit
{
  double intercept = 0.0;
  Eigen::VectorXd coef;  ///< original scale
  int cycles = 0;
  bool converged = false;
  /// Penalized objective (standardized scale) after each full cycle.
  std::vector<double> objective_trace;
};

/**
 * Minimizes (1/2n)|y - b0 - Z beta|^2 + lambda |beta|_1 over standardized
 * columns Z by cyclic coordinate descent; the intercept is unpenalized and
 * constant columns keep a zero coefficient.
 */
LassoFit lasso(const Eigen::MatrixXd & x, const Eigen::VectorXd & y, double lambda, double tol = 1e-7,
               int max_cycles = 100000);

/// R ~ [1, x, t, t x] with t = sign(a - k); sub-rule_k(x) = gamma + x.delta.
BaselineRule fit_pls_l1(const Dataset & data, double lambda_lasso);

}  // namespace ordinal_itr
