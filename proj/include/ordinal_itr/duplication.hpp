#pragma once

/**
 * @file
 * @brief Reduction of a K-level ordinal problem to K-1 stacked binary problems.
 *
 * Subject i contributes one row per threshold k = 1..K-1 with label
 * sign(a_i - k). The duplicated covariate (x_i, e_k) is never materialized:
 * the e_k block enters through the extended kernel's [k == h] term and
 * through per-threshold intercepts.
 */

#include "ordinal_itr/core.hpp"

#include <vector>

namespace ordinal_itr {

enum class Strategy { Full, Partial };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string & name);

struct DuplicatedSample
{
  Eigen::Index base_index = 0;  ///< 0-based subject index
  int threshold = 1;            ///< k in 1..K-1
  int label = -1;               ///< sign(a_i - k)
  double reward = 0.0;          ///< r^(k)
  double weight = 0.0;          ///< |r^(k)| / π(a_i|x_i)

  [[nodiscard]] bool nonnegative_reward() const noexcept { return reward >= 0.0; }

  /// Label flipped for negative rewards, so [1 + a f]_+ becomes [1 - y f]_+.
  [[nodiscard]] int effective_label() const noexcept { return reward >= 0.0 ? label : -label; }
};

/// n(K-1) rows, subject-major then threshold.
std::vector<DuplicatedSample> duplicate(const Dataset & data);

/// Rows with r^(k) = r_i I(a_i in {k, k+1}); zero-reward rows are dropped.
std::vector<DuplicatedSample> duplicate_partial(const Dataset & data);

std::vector<DuplicatedSample> duplicate(const Dataset & data, Strategy strategy);

/// k(x_i, x_j) + [k == h].
double extended_kernel(const KernelSpec & spec, std::span<const double> xi, int k, std::span<const double> xj, int h);

/// Dense extended-kernel Gram matrix over duplicated rows.
Eigen::MatrixXd extended_gram(const KernelSpec & spec, const Eigen::MatrixXd & x,
                              const std::vector<DuplicatedSample> & rows);

}  // namespace ordinal_itr
