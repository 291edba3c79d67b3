#include "ordinal_itr/evaluation.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <map>

using namespace ordinal_itr;

namespace {

/// Recommends each subject's observed treatment (keyed by the first covariate).
TreatmentMapRule observed_rule(const Dataset & d)
{
  std::map<double, int> lookup;
  for (Eigen::Index i = 0; i < d.size(); ++i) lookup[d.covariates()(i, 0)] = d.treatment(i);
  return TreatmentMapRule(d.levels(), d.dim(), [lookup](std::span<const double> x) { return lookup.at(x[0]); });
}

TreatmentMapRule constant_rule(int levels, Eigen::Index dim, int level)
{
  return TreatmentMapRule(levels, dim, [level](std::span<const double>) { return level; });
}

}  // namespace

TEST_CASE("misclassification")
{
  const LabeledDataset d = generate({ScenarioId::L3, 3000, 5});
  CHECK(misclassification(optimal_rule(ScenarioId::L3), d.data.covariates(), d.truth) == 0.0);
  const double non1 = std::count_if(d.truth.begin(), d.truth.end(), [](int t) { return t != 1; }) / 3000.0;
  CHECK(misclassification(constant_rule(3, 6, 1), d.data.covariates(), d.truth) == doctest::Approx(non1));

  const LabeledDataset b = generate({ScenarioId::L2, 10000, 6});
  const TreatmentMapRule coin(2, 4, [](std::span<const double> x) { return x[3] > 0.0 ? 2 : 1; });
  CHECK(std::abs(misclassification(coin, b.data.covariates(), b.truth) - 0.5) <= 0.02);
  CHECK_THROWS_AS(misclassification(coin, Eigen::MatrixXd(0, 4), {}), InvalidArgument);
  CHECK_THROWS_AS(misclassification(coin, b.data.covariates(), {1, 2}), InvalidArgument);
}

TEST_CASE("value of the hand example")
{
  Eigen::MatrixXd x(2, 1);
  x << 0.0, 1.0;
  const Dataset d(x, {1, 3}, Eigen::Vector2d(3, 6), 3, 1.0 / 3);
  CHECK(empirical_value(constant_rule(3, 1, 1), d) == doctest::Approx(3.0));
}

TEST_CASE("value is undefined when nothing agrees")
{
  Eigen::MatrixXd x(1, 1);
  x << 0.0;
  const Dataset d(x, {1}, Eigen::VectorXd::Constant(1, 2.0), 3, 1.0 / 3);
  CHECK_THROWS_AS(empirical_value(constant_rule(3, 1, 3), d), UndefinedValue);
}

TEST_CASE("observed-treatment rule has value mean(R) (100 random datasets)")
{
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    const int K = 2 + t % 6;
    const Dataset d = oracle::random_dataset(rng, 5 + t % 20, 2, K, -3.0, 5.0);
    CHECK(empirical_value(observed_rule(d), d) == doctest::Approx(d.rewards().mean()).epsilon(1e-12));
  }
}

TEST_CASE("value is invariant to row order")
{
  std::mt19937_64 rng(12);
  const Dataset d = oracle::random_dataset(rng, 40, 2, 4);
  const FittedRule rule = fit(d, 0.1, KernelSpec::linear());
  std::vector<Eigen::Index> idx(40);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  CHECK(empirical_value(rule, d.subset(idx)) == doctest::Approx(empirical_value(rule, d)).epsilon(1e-12));
}

TEST_CASE("value-MSE arithmetic")
{
  CHECK(value_mse({{1.0, 1.0}, {2.5, 2.5}}) == 0.0);
  CHECK(value_mse({{1.0, 2.0}, {3.0, 3.0}}) == doctest::Approx(0.5));
  CHECK(value_mse({{1.0, 1.25}}) == doctest::Approx(0.0625));
  CHECK_THROWS_AS(value_mse({}), InvalidArgument);
}

TEST_CASE("grid sizes")
{
  const Grid g;
  MethodSpec lin, gau, pls;
  gau.kernel = KernelType::Gaussian;
  pls.method = Method::PlsL1;
  const auto cells = g.cells(lin, 300);
  CHECK(cells.size() == 5);
  CHECK(cells.front().lambda == doctest::Approx(0.1 / 300));
  CHECK(cells.back().lambda == doctest::Approx(500.0 / 300));
  CHECK(g.cells(gau, 300).size() == 15);
  CHECK(g.cells(pls, 300).size() == 5);
  Grid empty;
  empty.lambda_multipliers.clear();
  CHECK_THROWS_AS(empty.cells(lin, 10), InvalidArgument);
}

TEST_CASE("tuning")
{
  const LabeledDataset tr = generate({ScenarioId::L3, 100, 1});
  const LabeledDataset ts = generate({ScenarioId::L3, 100, 2});
  MethodSpec m;

  const TuneResult one = tune(tr.data, ts.data, m, {{0.05, 1.0}});
  CHECK(one.best.lambda == 0.05);
  CHECK(one.rule != nullptr);

  // the optimal rule beats a constant rule on tuning data
  const LabeledDataset big = generate({ScenarioId::L3, 3000, 3});
  CHECK(empirical_value(optimal_rule(ScenarioId::L3), big.data) > empirical_value(constant_rule(3, 6, 1), big.data));

  // constant rewards make every cell tie; the largest lambda wins
  const Dataset flat = tr.data.with_rewards(Eigen::VectorXd::Constant(100, 2.0));
  const TuneResult tie = tune(flat, ts.data.with_rewards(Eigen::VectorXd::Constant(100, 2.0)), m, {{0.01, 1}, {1.0, 1}, {0.1, 1}});
  CHECK(tie.best.lambda == 1.0);

  MethodSpec g;
  g.kernel = KernelType::Gaussian;
  try {
    (void)tune(tr.data, ts.data, g, {{0.1, -1.0}, {0.2, 0.0}});
    FAIL("expected an error");
  } catch (const NumericalError & e) {
    const std::string msg = e.what();
    CHECK(msg.find("lambda=0.1") != std::string::npos);
    CHECK(msg.find("lambda=0.2") != std::string::npos);
  }
  CHECK_THROWS_AS(tune(tr.data, ts.data, m, {}), InvalidArgument);
  CHECK_THROWS_AS(tune(tr.data, ts.data, m, {{0.1, 1}}, Criterion::Misc), InvalidArgument);
  const TuneResult misc = tune(tr.data, ts.data, m, {{0.1, 1}, {1.0, 1}}, Criterion::Misc, &ts.truth);
  CHECK(misc.score <= 0.0);
}

TEST_CASE("cross-validation structure and determinism")
{
  std::mt19937_64 rng(13);
  const Dataset d = oracle::random_dataset(rng, 10, 2, 3, 0.5, 3.0);
  MethodSpec m;
  CrossValConfig c;
  c.folds = 10;
  c.reps = 2;
  c.grid.lambda_multipliers = {1.0, 10.0};
  const CrossValReport r = cross_validate(d, m, c);
  CHECK(r.values.size() + r.missing == 20);

  const CrossValReport again = cross_validate(d, m, c);
  CHECK(r.values == again.values);
  CHECK(r.missing == again.missing);

  const Dataset flat = d.with_rewards(Eigen::VectorXd::Constant(10, 1.5));
  c.folds = 5;
  const CrossValReport fr = cross_validate(flat, m, c);
  CHECK(fr.missing == 0);
  for (double v : fr.values) CHECK(v == doctest::Approx(1.5));

  c.folds = 11;
  CHECK_THROWS_AS(cross_validate(d, m, c), InvalidArgument);
}

TEST_CASE("bench report structure")
{
  BenchConfig c;
  c.scenario = ScenarioId::L2;
  c.n = 40;
  c.replicates = 1;
  c.grid.lambda_multipliers = {1.0, 10.0};
  MethodSpec g, p;
  p.method = Method::PlsL1;
  const EvalReport a = run_bench(c, g);
  const EvalReport b = run_bench(c, p);
  CHECK(a.replicates.size() == 1);
  CHECK(a.single_replicate());
  CHECK(a.misc_sd() == 0.0);
  const std::string table = format_reports({a, b});
  CHECK(table.find("GOWL-Linear") != std::string::npos);
  CHECK(table.find("PLS-l1") != std::string::npos);
  CHECK(table.find("sd reported as 0") != std::string::npos);

  c.replicates = 3;
  c.threads = 2;
  const EvalReport par = run_bench(c, g);
  c.threads = 1;
  const EvalReport ser = run_bench(c, g);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(par.replicates[r].misc == ser.replicates[r].misc);
    CHECK(par.replicates[r].value_fitted == ser.replicates[r].value_fitted);
  }
  CHECK(!ser.single_replicate());
  CHECK(ser.value_mse() >= 0.0);
}
