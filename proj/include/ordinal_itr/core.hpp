#pragma once

/**
 * @file
 * @brief Domain types shared by the whole library: datasets, kernels and the
 * sign-dependent hinge surrogate.
 */

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ordinal_itr {

/// Raised when an input violates a documented precondition.
class InvalidArgument : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an iterative method fails in a way callers should surface.
class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/**
 * @brief Observational or trial data with ordinal treatments.
 *
 * Treatments are 1-based levels in {1..K}. The propensity column holds the
 * resolved probability of the treatment actually received, π(a_i | x_i).
 */
class Dataset
{
public:
  Dataset(Eigen::MatrixXd covariates,
          std::vector<int> treatments,
          Eigen::VectorXd rewards,
          Eigen::VectorXd propensity,
          int levels);

  /// Convenience constructor with a constant propensity.
  Dataset(Eigen::MatrixXd covariates, std::vector<int> treatments, Eigen::VectorXd rewards, int levels,
          double propensity);

  [[nodiscard]] Eigen::Index size() const noexcept { return x_.rows(); }
  [[nodiscard]] Eigen::Index dim() const noexcept { return x_.cols(); }
  [[nodiscard]] int levels() const noexcept { return levels_; }

  [[nodiscard]] const Eigen::MatrixXd & covariates() const noexcept { return x_; }
  [[nodiscard]] const std::vector<int> & treatments() const noexcept { return a_; }
  [[nodiscard]] const Eigen::VectorXd & rewards() const noexcept { return r_; }
  [[nodiscard]] const Eigen::VectorXd & propensity() const noexcept { return pi_; }

  [[nodiscard]] Eigen::VectorXd row(Eigen::Index i) const { return x_.row(i).transpose(); }
  [[nodiscard]] int treatment(Eigen::Index i) const { return a_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] double reward(Eigen::Index i) const { return r_[i]; }

  /// Rows selected by index, in the given order.
  [[nodiscard]] Dataset subset(std::span<const Eigen::Index> rows) const;

  /// Same rows with a different reward vector.
  [[nodiscard]] Dataset with_rewards(Eigen::VectorXd rewards) const;

  /// Same rows with a different propensity vector.
  [[nodiscard]] Dataset with_propensity(Eigen::VectorXd propensity) const;

private:
  void validate() const;

  Eigen::MatrixXd x_;
  std::vector<int> a_;
  Eigen::VectorXd r_;
  Eigen::VectorXd pi_;
  int levels_;
};

enum class KernelType { Linear, Gaussian };

/// Base kernel on the original covariate space.
struct KernelSpec
{
  KernelType type = KernelType::Linear;
  /// Gaussian bandwidth, k(x,y) = exp(-|x-y|^2 / (2 sigma^2)).
  double sigma = 1.0;

  static KernelSpec linear() { return {KernelType::Linear, 1.0}; }
  static KernelSpec gaussian(double sigma) { return {KernelType::Gaussian, sigma}; }

  /// Throws InvalidArgument for a non-positive or non-finite Gaussian bandwidth.
  void validate() const;

  [[nodiscard]] double operator()(std::span<const double> x, std::span<const double> y) const;
};

std::string to_string(KernelType type);
KernelType kernel_type_from_string(const std::string & name);

/// Base-kernel Gram matrix between the rows of `a` and the rows of `b`.
Eigen::MatrixXd kernel_matrix(const KernelSpec & spec, const Eigen::MatrixXd & a, const Eigen::MatrixXd & b);

/// +1 iff u > 0, otherwise -1 (zero maps to -1).
int sign_of(double u);

/**
 * Surrogate loss for a margin u = a f(x) and reward r:
 * [1-u]_+ when r >= 0 and [1+u]_+ when r < 0.
 */
double modified_hinge(double u, double r);

inline std::span<const double> as_span(const Eigen::VectorXd & v)
{
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace ordinal_itr
