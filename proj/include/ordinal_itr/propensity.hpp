#pragma once

/**
 * @file
 * @brief Treatment probabilities π(a | x) for inverse-propensity weighting.
 */

#include "ordinal_itr/core.hpp"

namespace ordinal_itr {

enum class PropensityKind { Uniform, Empirical, ProportionalOdds };

std::string to_string(PropensityKind kind);

/**
 * Uniform and empirical models are constant in x. The proportional-odds model
 * uses P(A <= k | x) = logistic(theta_k - x.gamma) with increasing cutpoints.
 */
class PropensityModel
{
public:
  static PropensityModel uniform(int levels);
  static PropensityModel empirical(Eigen::VectorXd probabilities);
  static PropensityModel proportional_odds(Eigen::VectorXd cutpoints, Eigen::VectorXd gamma);

  [[nodiscard]] PropensityKind kind() const noexcept { return kind_; }
  [[nodiscard]] int levels() const noexcept { return levels_; }
  [[nodiscard]] const Eigen::VectorXd & cutpoints() const noexcept { return theta_; }
  [[nodiscard]] const Eigen::VectorXd & gamma() const noexcept { return gamma_; }

  /// Class probabilities for a = 1..K.
  [[nodiscard]] Eigen::VectorXd probabilities(std::span<const double> x) const;
  [[nodiscard]] double probability(std::span<const double> x, int a) const;
  /// π(a_i | x_i) for every row, floored at `floor`.
  [[nodiscard]] Eigen::VectorXd per_row(const Eigen::MatrixXd & x, const std::vector<int> & a,
                                        double floor = 1e-6) const;

  // Fit diagnostics (proportional odds only).
  bool converged = true;
  int iterations = 0;
  double gradient_norm = 0.0;
  /// Set when a Newton iterate had to be projected back to increasing cutpoints.
  bool projected = false;
  /// Near-perfect fit or diverging parameters; the estimate is not a finite MLE.
  bool separated = false;
  std::vector<double> nll_trace;

private:
  PropensityKind kind_ = PropensityKind::Uniform;
  int levels_ = 2;
  Eigen::VectorXd probs_;
  Eigen::VectorXd theta_;
  Eigen::VectorXd gamma_;
};

/// π(a) = count(a) / n. Throws InvalidArgument naming an unobserved level.
PropensityModel empirical_propensity(const std::vector<int> & treatments, int levels);

struct OrdinalLogitOptions
{
  double grad_tol = 1e-6;
  int max_iter = 200;
  int max_halvings = 50;
};

/**
 * Maximum likelihood by damped Newton. Non-convergence and separation
 * (negative log-likelihood below 1e-4 or a parameter beyond 100 in absolute
 * value) are reported through the model's diagnostics rather than thrown.
 */
PropensityModel fit_proportional_odds(const Eigen::MatrixXd & x, const std::vector<int> & a, int levels,
                                      const OrdinalLogitOptions & options = {});

/// Negative log-likelihood of the cumulative-logit model.
double ordinal_nll(const Eigen::MatrixXd & x, const std::vector<int> & a, int levels,
                   const Eigen::VectorXd & theta, const Eigen::VectorXd & gamma);

}  // namespace ordinal_itr
