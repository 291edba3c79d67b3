#include "ordinal_itr/baselines.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/QR>

using namespace ordinal_itr;

TEST_CASE("OWL shift")
{
  const Eigen::Vector3d r(-1.0, 0.0, 2.0);
  const double sd = std::sqrt(((r.array() - r.mean()).square().sum()) / 2.0);
  CHECK(owl_shift(r, {}) == doctest::Approx(1.0 + 0.1 * sd));
  OwlOptions o;
  o.shift = 15.0;
  CHECK(owl_shift(r, o) == 15.0);
}

TEST_CASE("OWL fits one binary sub-rule per threshold")
{
  std::mt19937_64 rng(2);
  const Dataset d = oracle::random_dataset(rng, 30, 2, 3);
  const BaselineRule r = fit_owl(d, 0.1, KernelSpec::linear());
  CHECK(r.subrules().size() == 2);
  CHECK(r.levels() == 3);
  CHECK(r.method() == BaselineMethod::Owl);
  for (int p : r.predict(d.covariates())) CHECK((p >= 1 && p <= 3));
}

TEST_CASE("toy example: shifting pulls both points toward their assigned treatment")
{
  // two subjects on opposite sides of zero, both given treatment 2, rewards -10 and +10
  Eigen::MatrixXd x(2, 1);
  x << -1, 1;
  const Dataset d(x, {2, 2}, Eigen::Vector2d(-10, 10), 2, 0.5);
  OwlOptions o;
  o.shift = 15.0;
  const BaselineRule owl = fit_owl(d, 0.5, KernelSpec::linear(), o);
  const auto p = owl.predict(x);
  CHECK(p[0] == 2);
  CHECK(p[1] == 2);
  const FittedRule gowl = fit(d, 0.5, KernelSpec::linear());
  const auto q = gowl.predict(x);
  CHECK(q[0] == 1);
  CHECK(q[1] == 2);
}

TEST_CASE("OWL decision values depend on the shift constant")
{
  std::mt19937_64 rng(4);
  const Dataset d = oracle::random_dataset(rng, 30, 2, 2);
  OwlOptions a, b;
  a.shift = 3.0;
  b.shift = 10.0;
  const Eigen::MatrixXd fa = fit_owl(d, 0.1, KernelSpec::linear(), a).decision_matrix(d.covariates());
  const Eigen::MatrixXd fb = fit_owl(d, 0.1, KernelSpec::linear(), b).decision_matrix(d.covariates());
  CHECK((fa - fb).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("GOWL weights use the raw reward magnitude")
{
  std::mt19937_64 rng(6);
  const Dataset d = oracle::random_dataset(rng, 10, 2, 3);
  for (const auto & r : duplicate(d))
    CHECK(r.weight == doctest::Approx(std::abs(d.reward(r.base_index)) / d.propensity()[r.base_index]));
}

TEST_CASE("lasso null solution above the critical penalty")
{
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  Eigen::MatrixXd x(50, 3);
  Eigen::VectorXd y(50);
  for (Eigen::Index i = 0; i < 50; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = n(rng);
    y[i] = x(i, 0) - 2 * x(i, 1) + n(rng);
  }
  Eigen::MatrixXd z = x.rowwise() - x.colwise().mean();
  for (int j = 0; j < 3; ++j) z.col(j) /= std::sqrt(z.col(j).squaredNorm() / 50.0);
  const double lmax = (z.transpose() * (y.array() - y.mean()).matrix()).cwiseAbs().maxCoeff() / 50.0;
  const LassoFit f = lasso(x, y, lmax * 1.0001);
  CHECK(f.coef.isZero());
  CHECK(f.intercept == doctest::Approx(y.mean()));
  CHECK(!lasso(x, y, lmax * 0.9).coef.isZero());
}

TEST_CASE("lasso with zero penalty reproduces OLS")
{
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n;
  Eigen::MatrixXd x(80, 3);
  Eigen::VectorXd y(80);
  for (Eigen::Index i = 0; i < 80; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = n(rng);
    y[i] = 0.5 + x(i, 0) - 2 * x(i, 1) + 0.3 * x(i, 2) + n(rng);
  }
  Eigen::MatrixXd design(80, 4);
  design << Eigen::VectorXd::Ones(80), x;
  const Eigen::VectorXd ols = design.colPivHouseholderQr().solve(y);
  const LassoFit f = lasso(x, y, 0.0, 1e-12);
  CHECK(f.intercept == doctest::Approx(ols[0]).epsilon(1e-6));
  for (int j = 0; j < 3; ++j) CHECK(f.coef[j] == doctest::Approx(ols[j + 1]).epsilon(1e-6));

  const LassoFit one = lasso(x.col(0), y, 0.0, 1e-12);
  const double xm = x.col(0).mean(), ym = y.mean();
  const double slope = ((x.col(0).array() - xm) * (y.array() - ym)).sum() / (x.col(0).array() - xm).square().sum();
  CHECK(one.coef[0] == doctest::Approx(slope).epsilon(1e-9));
}

TEST_CASE("lasso on an orthonormal standardized design soft-thresholds OLS")
{
  // columns are centred, mutually orthogonal and have unit mean square
  Eigen::MatrixXd x(4, 2);
  x << 1, 1, -1, 1, 1, -1, -1, -1;
  const Eigen::Vector4d y(3, 1, -0.5, 0.25);
  for (double lambda : {0.0, 0.1, 0.5, 1.0, 2.0}) {
    const LassoFit f = lasso(x, y, lambda, 1e-12);
    for (int j = 0; j < 2; ++j) {
      const double ols = x.col(j).dot(y) / 4.0;
      const double st = ols > lambda ? ols - lambda : (ols < -lambda ? ols + lambda : 0.0);
      CHECK(f.coef[j] == doctest::Approx(st).epsilon(1e-9));
    }
  }
}

TEST_CASE("lasso objective decreases every cycle and constant columns stay zero")
{
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n;
  Eigen::MatrixXd x(60, 5);
  Eigen::VectorXd y(60);
  for (Eigen::Index i = 0; i < 60; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = n(rng);
    x(i, 4) = 2.0;
    x(i, 1) = 0.9 * x(i, 0) + 0.1 * x(i, 1);
    y[i] = x(i, 0) + x(i, 1) + n(rng);
  }
  const LassoFit f = lasso(x, y, 0.05);
  CHECK(f.converged);
  CHECK(f.coef[4] == 0.0);
  for (std::size_t c = 1; c < f.objective_trace.size(); ++c) CHECK(f.objective_trace[c] <= f.objective_trace[c - 1] + 1e-12);
}

TEST_CASE("PLS-l1 sub-rules use the interaction block")
{
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-1, 1);
  std::normal_distribution<double> n(0.0, 0.1);
  const Eigen::Index N = 400;
  Eigen::MatrixXd x(N, 2);
  std::vector<int> a(N);
  Eigen::VectorXd r(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    x(i, 0) = u(rng);
    x(i, 1) = u(rng);
    a[static_cast<std::size_t>(i)] = u(rng) > 0 ? 2 : 1;
    const double t = a[static_cast<std::size_t>(i)] == 2 ? 1.0 : -1.0;
    r[i] = 1.0 + x(i, 1) + t * (0.2 + x(i, 0)) + n(rng);
  }
  const BaselineRule rule = fit_pls_l1(Dataset(x, a, r, 2, 0.5), 1e-4);
  REQUIRE(rule.subrules().size() == 1);
  const FittedRule & s = rule.subrules().front();
  CHECK(s.beta()[0] == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(s.beta()[1]) < 0.05);
  CHECK(s.intercepts()[0] == doctest::Approx(0.2).epsilon(0.1));
  CHECK_THROWS_AS(fit_pls_l1(Dataset(x.topRows(2), {1, 2}, r.head(2), 2, 0.5), 0.1), InvalidArgument);
}
