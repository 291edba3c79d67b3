#pragma once

/**
 * @file
 * @brief Benchmark scenarios with known optimal treatment rules.
 *
 * Covariates are i.i.d. U(-1,1), treatments uniform on {1..K} and
 * independent of X, rewards R = Q(X,A) + N(0,1).
 */

#include "ordinal_itr/core.hpp"
#include "ordinal_itr/rule.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string_view>

namespace ordinal_itr {

/// Portable random stream: mt19937_64 with explicit uniform and normal transforms.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [lo, hi].
  int integer(int lo, int hi);
  double normal();

  std::mt19937_64 & engine() noexcept { return engine_; }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Seed for a named sub-stream; independent of the order streams are created.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replicate, std::uint64_t role);

enum class ScenarioId { L2, L3, L5, L7, N2, N3, N5, N7, NP3 };

inline constexpr std::array<ScenarioId, 9> kAllScenarios = {ScenarioId::L2, ScenarioId::L3, ScenarioId::L5,
                                                            ScenarioId::L7, ScenarioId::N2, ScenarioId::N3,
                                                            ScenarioId::N5, ScenarioId::N7, ScenarioId::NP3};

std::string to_string(ScenarioId id);
/// Throws InvalidArgument listing the valid ids.
ScenarioId scenario_from_string(std::string_view name);
std::string valid_scenario_ids();

int scenario_levels(ScenarioId id);
int scenario_dim(ScenarioId id);

struct ScenarioConfig
{
  ScenarioId id = ScenarioId::L3;
  Eigen::Index n = 100;
  std::uint64_t seed = 0;
};

/// Q(x, a) for a = 1..K.
Eigen::VectorXd q_values(ScenarioId id, std::span<const double> x);

/// The unique maximizer of Q(x, .), computed from the closed-form rule.
int true_optimal(ScenarioId id, std::span<const double> x);

/// The optimal rule as a Rule (staircase decisions).
TreatmentMapRule optimal_rule(ScenarioId id);

struct LabeledDataset
{
  Dataset data;
  std::vector<int> truth;
  Eigen::MatrixXd q;  ///< n x K
};

/// Propensity is the known design probability 1/K.
LabeledDataset generate(const ScenarioConfig & config);

}  // namespace ordinal_itr
