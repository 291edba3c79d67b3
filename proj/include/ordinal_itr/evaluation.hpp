#pragma once

/**
 * @file
 * @brief Metrics, tuning-set selection, the simulation protocol and
 * cross-validated value estimation.
 */

#include "ordinal_itr/baselines.hpp"
#include "ordinal_itr/simulation.hpp"

#include <memory>
#include <optional>

namespace ordinal_itr {

/// Raised when the value estimator's denominator is zero.
class UndefinedValue : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

/// Fraction of rows where the rule's recommendation differs from `truth`.
double misclassification(const Rule & rule, const Eigen::MatrixXd & x, const std::vector<int> & truth);

/**
 * Ratio of propensity-weighted rewards to propensity weights over the
 * duplicated rows whose label sign(a - k) agrees with sign f(x^(k)).
 */
double empirical_value(const Rule & rule, const Dataset & data);

/// Mean of (fitted - optimal)^2 over replicates.
double value_mse(const std::vector<std::pair<double, double>> & values);

enum class Method { Gowl, Owl, PlsL1 };

std::string to_string(Method m);
Method method_from_string(const std::string & name);

struct MethodSpec
{
  Method method = Method::Gowl;
  KernelType kernel = KernelType::Linear;
  Strategy strategy = Strategy::Full;
  bool isotonic = false;
  std::optional<double> owl_shift;
  double kkt_tol = 1e-5;
  std::int64_t max_iter = 0;

  /// Row label in reports, e.g. "GOWL-Linear".
  [[nodiscard]] std::string label() const;
};

/// For PLS-l1, lambda is the lasso penalty and sigma is unused.
struct GridCell
{
  double lambda = 1.0;
  double sigma = 1.0;
};

std::string to_string(const GridCell & cell);

struct Grid
{
  /// lambda = i / n for each multiplier i (GOWL and OWL).
  std::vector<double> lambda_multipliers{0.1, 1.0, 10.0, 100.0, 500.0};
  std::vector<double> sigmas{0.1, 1.0, 10.0};
  /// Lasso penalties for PLS-l1.
  std::vector<double> lasso_lambdas{0.001, 0.01, 0.05, 0.1, 0.2};

  /// Concrete cells for a method and training size.
  [[nodiscard]] std::vector<GridCell> cells(const MethodSpec & method, Eigen::Index n) const;
};

using RulePtr = std::shared_ptr<const Rule>;

RulePtr fit_method(const MethodSpec & method, const Dataset & train, const GridCell & cell);

enum class Criterion { Value, Misc };

struct TuneResult
{
  GridCell best;
  RulePtr rule;
  double score = 0.0;
  std::vector<GridCell> cells;
  /// Value (or negated MISC) per cell; NaN for failed cells.
  std::vector<double> scores;
  std::vector<std::string> failures;
};

/**
 * Fits every cell on `train` and keeps the one with the largest tuning-set
 * value (or smallest MISC); ties go to the larger lambda. Throws
 * NumericalError listing every cell's failure when none succeeds.
 */
TuneResult tune(const Dataset & train, const Dataset & tune_set, const MethodSpec & method,
                const std::vector<GridCell> & cells, Criterion criterion = Criterion::Value,
                const std::vector<int> * tune_truth = nullptr, int threads = 1);

/// Runs fn(0..count-1) on up to `threads` workers.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)> & fn);

/// Thread count from ORDINAL_ITR_THREADS, else 1.
int default_threads();

struct ReplicateResult
{
  double misc = 0.0;
  double value_fitted = 0.0;
  double value_optimal = 0.0;
  GridCell chosen;
  bool ok = false;
  std::string error;
};

struct EvalReport
{
  std::string scenario;
  std::string method;
  Eigen::Index n = 0;
  std::vector<ReplicateResult> replicates;

  [[nodiscard]] std::size_t succeeded() const;
  [[nodiscard]] double misc_mean() const;
  [[nodiscard]] double misc_sd() const;
  [[nodiscard]] double value_mse() const;
  /// Sample sd of the per-replicate squared value gaps.
  [[nodiscard]] double value_mse_sd() const;
  /// Sd is reported as 0 and flagged when fewer than two replicates succeeded.
  [[nodiscard]] bool single_replicate() const { return succeeded() < 2; }
};

struct BenchConfig
{
  ScenarioId scenario = ScenarioId::L3;
  Eigen::Index n = 300;
  int replicates = 20;
  std::uint64_t seed = 1;
  /// Test size as a multiple of n.
  int test_multiple = 10;
  Grid grid;
  Criterion criterion = Criterion::Value;
  int threads = 1;
};

/// Sub-stream roles for derive_seed.
enum class StreamRole : std::uint64_t { Train = 0, Tune = 1, Test = 2, CrossVal = 3, InnerSplit = 4 };

/// Train, tune and test sets of one replicate.
struct ReplicateData
{
  LabeledDataset train, tune, test;
};
ReplicateData replicate_data(const BenchConfig & config, int replicate);

/// Generate, tune, fit and evaluate every replicate for one method.
EvalReport run_bench(const BenchConfig & config, const MethodSpec & method);

/// One row per report: method, MISC mean (sd), value-MSE mean (sd).
std::string format_reports(const std::vector<EvalReport> & reports);

struct CrossValReport
{
  std::vector<double> values;  ///< successful rep x fold values
  std::size_t missing = 0;
  std::vector<std::string> notes;
  [[nodiscard]] double mean() const;
  [[nodiscard]] double sd() const;
};

struct CrossValConfig
{
  int folds = 5;
  int reps = 50;
  std::uint64_t seed = 1;
  /// Fraction of the training folds used for fitting during inner tuning.
  double inner_fraction = 0.8;
  Grid grid;
  int threads = 1;
};

CrossValReport cross_validate(const Dataset & data, const MethodSpec & method, const CrossValConfig & config);

double mean_of(const std::vector<double> & v);
/// Sample standard deviation; 0 for fewer than two values.
double sd_of(const std::vector<double> & v);

}  // namespace ordinal_itr
