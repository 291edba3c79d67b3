#pragma once

/**
 * @file
 * @brief GOWL fitting: dual QP over duplicated rows, primal recovery and
 * per-threshold intercepts.
 *
 * Minimizing
 * \f[
 *   \tfrac12 \|g\|^2 + C \sum_{i,k} w_i^{(k)} \phi\big(a_i^{(k)} (g(x_i) + b_k), r_i^{(k)}\big),
 *   \qquad C = 1/(2\lambda),
 * \f]
 * with free intercepts b_k has the dual
 * \f[
 *   \max\; \sum (\alpha + \eta) - \tfrac12 v^T \tilde K v,\qquad v = (\alpha - \eta) \odot a,
 * \f]
 * subject to 0 <= alpha <= C w I(r >= 0), 0 <= eta <= C w I(r < 0) and one
 * equality sum_i v_i^(k) = 0 for every threshold k. On that feasible set the
 * [k == h] part of the extended kernel contributes nothing.
 */

#include "ordinal_itr/duplication.hpp"
#include "ordinal_itr/rule.hpp"

#include <cstdint>
#include <optional>

namespace ordinal_itr {

struct SolverConfig
{
  double C = 1.0;
  double kkt_tol = 1e-5;
  /// 0 selects 1000 * (number of rows).
  std::int64_t max_iter = 0;
  std::uint64_t seed = 0;
};

struct DualSolution
{
  std::vector<double> alpha;  ///< active on rows with r^(k) >= 0
  std::vector<double> eta;    ///< active on rows with r^(k) < 0
  double dual_objective = 0.0;
  double kkt_violation = 0.0;
  std::int64_t iterations = 0;
  bool converged = false;
  /// Dual objective after every sweep of (number of rows) pair updates.
  std::vector<double> objective_trace;

  /// alpha - eta per row.
  [[nodiscard]] double net(std::size_t row) const { return alpha[row] - eta[row]; }
};

/**
 * Pairwise coordinate ascent (SMO with second-order working-set selection).
 * Each step moves two multipliers of the same threshold block so every
 * block's equality constraint stays satisfied.
 *
 * `base_gram` is the n x n base-kernel matrix over subjects; the extended
 * [k == h] term is added implicitly.
 */
DualSolution solve_dual(const std::vector<DuplicatedSample> & rows,
                        const Eigen::MatrixXd & base_gram,
                        const SolverConfig & config);

/// L_D evaluated directly from its definition.
double dual_objective(const std::vector<DuplicatedSample> & rows,
                      const Eigen::MatrixXd & base_gram,
                      std::span<const double> alpha,
                      std::span<const double> eta);

/// Gradient of L_D with respect to alpha and eta (all rows).
std::pair<Eigen::VectorXd, Eigen::VectorXd> dual_gradient(const std::vector<DuplicatedSample> & rows,
                                                          const Eigen::MatrixXd & base_gram,
                                                          std::span<const double> alpha,
                                                          std::span<const double> eta);

/// beta = sum over rows of (alpha - eta) a x_i.
Eigen::VectorXd recover_slope_linear(const DualSolution & dual,
                                     const std::vector<DuplicatedSample> & rows,
                                     const Dataset & data);

/// c_j = sum_h (alpha_j^(h) - eta_j^(h)) a_j^(h).
Eigen::VectorXd recover_coeffs_kernel(const DualSolution & dual,
                                      const std::vector<DuplicatedSample> & rows,
                                      Eigen::Index subjects);

struct InterceptFit
{
  Eigen::VectorXd b;
  /// Thresholds whose rows all carry zero weight; b_k is then 0.
  std::vector<bool> degenerate;
};

/**
 * For each k, minimizes sum_i w_i phi(a_i^(k) (g_i + b_k), r_i^(k)) over b_k
 * exactly by a sweep over sorted breakpoints. A flat optimal interval yields
 * its midpoint; unbounded ends are clipped to +-(max|g| + 1).
 */
InterceptFit recover_intercepts(std::span<const double> g_values,
                                const std::vector<DuplicatedSample> & rows,
                                int levels);

/// Pool-adjacent-violators projection onto non-increasing sequences.
Eigen::VectorXd isotonic_nonincreasing(const Eigen::VectorXd & b);

enum class RuleKind { Linear, Kernel };

/// Fitted decision rule f(x^(k)) = g(x) + b_k.
class FittedRule final : public Rule
{
public:
  FittedRule() = default;

  static FittedRule linear(Eigen::VectorXd beta, Eigen::VectorXd intercepts);
  static FittedRule kernel(KernelSpec spec, Eigen::MatrixXd support, Eigen::VectorXd coeffs,
                           Eigen::VectorXd intercepts);

  [[nodiscard]] int levels() const override { return static_cast<int>(b_.size()) + 1; }
  [[nodiscard]] Eigen::Index dim() const override { return kind_ == RuleKind::Linear ? beta_.size() : support_.cols(); }
  [[nodiscard]] Eigen::VectorXd decision_values(std::span<const double> x) const override;
  [[nodiscard]] Eigen::MatrixXd decision_matrix(const Eigen::MatrixXd & x) const override;

  /// g(x), the threshold-free part of the decision function.
  [[nodiscard]] double score(std::span<const double> x) const;
  [[nodiscard]] Eigen::VectorXd scores(const Eigen::MatrixXd & x) const;

  /// Squared RKHS norm of g.
  [[nodiscard]] double norm_squared() const;

  [[nodiscard]] RuleKind kind() const noexcept { return kind_; }
  [[nodiscard]] const KernelSpec & kernel_spec() const noexcept { return spec_; }
  [[nodiscard]] const Eigen::VectorXd & beta() const noexcept { return beta_; }
  [[nodiscard]] const Eigen::MatrixXd & support() const noexcept { return support_; }
  [[nodiscard]] const Eigen::VectorXd & coeffs() const noexcept { return coeffs_; }
  [[nodiscard]] const Eigen::VectorXd & intercepts() const noexcept { return b_; }

  double lambda = 0.0;
  double C = 0.0;
  double kkt_violation = 0.0;
  bool converged = true;
  double dual_objective = 0.0;

private:
  RuleKind kind_ = RuleKind::Linear;
  KernelSpec spec_{};
  Eigen::VectorXd beta_;
  Eigen::MatrixXd support_;
  Eigen::VectorXd coeffs_;
  Eigen::VectorXd b_;
};

struct FitOptions
{
  Strategy strategy = Strategy::Full;
  /// Project intercepts onto non-increasing sequences after recovery.
  bool isotonic = false;
  double kkt_tol = 1e-5;
  std::int64_t max_iter = 0;
  std::uint64_t seed = 0;
};

/// Base-kernel Gram over subjects, with a 1e-10 diagonal jitter when the
/// smallest eigenvalue falls below -1e-8.
Eigen::MatrixXd subject_gram(const KernelSpec & spec, const Eigen::MatrixXd & x);

/// Fit on already duplicated rows (used by the baselines for binary subproblems).
FittedRule fit_rows(const Dataset & data, const std::vector<DuplicatedSample> & rows, double lambda,
                    const KernelSpec & spec, const FitOptions & options = {},
                    const Eigen::MatrixXd * gram = nullptr, DualSolution * dual_out = nullptr);

FittedRule fit(const Dataset & data, double lambda, const KernelSpec & spec, const FitOptions & options = {});

/// 1/2 |g|^2 + C sum w phi(a (g + b_k), r) at the given rule.
double primal_objective(const FittedRule & rule, const Dataset & data, const std::vector<DuplicatedSample> & rows);

}  // namespace ordinal_itr
