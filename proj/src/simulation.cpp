#include "ordinal_itr/simulation.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace ordinal_itr {

int Rng::integer(int lo, int hi)
{
  // rejection sampling keeps the result independent of the library
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return lo + static_cast<int>(v % span);
}

double Rng::normal()
{
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  spare_ = rad * std::sin(th);
  has_spare_ = true;
  return rad * std::cos(th);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replicate, std::uint64_t role)
{
  // splitmix64 finalizer over a mixed key
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (replicate + 1) + 0xD1B54A32D192ED03ULL * (role + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string to_string(ScenarioId id)
{
  switch (id) {
  case ScenarioId::L2: return "L2";
  case ScenarioId::L3: return "L3";
  case ScenarioId::L5: return "L5";
  case ScenarioId::L7: return "L7";
  case ScenarioId::N2: return "N2";
  case ScenarioId::N3: return "N3";
  case ScenarioId::N5: return "N5";
  case ScenarioId::N7: return "N7";
  case ScenarioId::NP3: return "NP3";
  }
  return "?";
}

std::string valid_scenario_ids()
{
  std::string s;
  for (auto id : kAllScenarios) {
    if (!s.empty()) s += ", ";
    s += to_string(id);
  }
  return s;
}

ScenarioId scenario_from_string(std::string_view name)
{
  for (auto id : kAllScenarios)
    if (to_string(id) == name) return id;
  throw InvalidArgument("unknown scenario '" + std::string(name) + "'; valid ids: " + valid_scenario_ids());
}

int scenario_levels(ScenarioId id)
{
  switch (id) {
  case ScenarioId::L2:
  case ScenarioId::N2: return 2;
  case ScenarioId::L3:
  case ScenarioId::N3:
  case ScenarioId::NP3: return 3;
  case ScenarioId::L5:
  case ScenarioId::N5: return 5;
  case ScenarioId::L7:
  case ScenarioId::N7: return 7;
  }
  return 0;
}

int scenario_dim(ScenarioId id)
{
  switch (id) {
  case ScenarioId::L2:
  case ScenarioId::N2: return 4;
  case ScenarioId::NP3: return 2;
  default: return 6;
  }
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Interior cut-offs b_1..b_{K-1}; b_0 = -inf and b_K = +inf are implicit.
std::vector<double> cutoffs(ScenarioId id)
{
  switch (id) {
  case ScenarioId::L3: return {-0.5, 1.0};
  case ScenarioId::L5: return {-1.9, -0.5, 0.5, 1.7};
  case ScenarioId::L7: return {-2.1, -1.2, -0.4, 0.4, 1.0, 2.1};
  case ScenarioId::N3: return {0.0, 1.3};
  case ScenarioId::N5: return {-0.4, 0.3, 1.1, 2.1};
  case ScenarioId::N7: return {-0.7, -0.2, 0.4, 1.0, 1.8, 2.8};
  default: return {};
  }
}

double boundary_score(ScenarioId id, std::span<const double> x)
{
  switch (id) {
  case ScenarioId::L3:
  case ScenarioId::L5:
  case ScenarioId::L7: return -x[0] + 2.0 * x[1] + x[2] + 0.6 * x[3] - 1.5 * (x[4] + x[5]);
  case ScenarioId::N3:
  case ScenarioId::N5: {
    const double d = x[2] - 0.6 * x[3];
    return -3.0 - x[0] * x[0] + 2.0 * std::exp(x[1]) + d * d + x[4] * x[4] * x[4] + std::exp(x[5] * x[5]);
  }
  case ScenarioId::N7: {
    const double d = x[2] - 0.6 * x[3];
    return -3.0 - x[0] * x[0] + 2.0 * std::exp(x[1]) + d * d + x[4] * x[4] * x[4];
  }
  default: return 0.0;
  }
}

/// Index i with g in (b_{i-1}, b_i].
int bin_of(double g, const std::vector<double> & cuts)
{
  int i = 1;
  for (double c : cuts) {
    if (g <= c) return i;
    ++i;
  }
  return i;
}

double baseline_effect(ScenarioId id, std::span<const double> x)
{
  switch (id) {
  case ScenarioId::L2: return 1.0 + x[0] + x[1] + 2.0 * x[2] + 0.5 * x[3];
  case ScenarioId::N2: return 1.0 + x[0] * x[0] + x[1] * x[1] - 2.0 * x[2] + 0.5 * x[3];
  case ScenarioId::NP3: return 2.0 + x[0] + 0.5 * x[1];
  default: return 2.0 + 2.0 * x[0] + x[1] + 0.5 * x[2];
  }
}

int np3_rule(std::span<const double> x)
{
  const double a = x[0] + 1.0, b = x[1] + 1.0;
  if (a * a + b * b < 1.0) return 1;
  if (x[0] + x[1] > 2.0 / 3.0) return 2;
  return 3;
}

void check_point(ScenarioId id, std::span<const double> x)
{
  if (static_cast<int>(x.size()) != scenario_dim(id))
    throw InvalidArgument("scenario " + to_string(id) + " expects " + std::to_string(scenario_dim(id)) +
                          " covariates, got " + std::to_string(x.size()));
}

}  // namespace

Eigen::VectorXd q_values(ScenarioId id, std::span<const double> x)
{
  check_point(id, x);
  const int K = scenario_levels(id);
  const double mu = baseline_effect(id, x);
  Eigen::VectorXd q(K);
  for (int a = 1; a <= K; ++a) {
    double t = 0.0;
    switch (id) {
    case ScenarioId::L2: t = 1.8 * (0.3 - x[0] - x[1]) * (2 * a - 3); break;
    case ScenarioId::N2: t = 4.0 * (0.7 - x[0] * x[0] - x[1] * x[1]) * (2 * a - 3); break;
    case ScenarioId::NP3: t = -2.0 * std::abs(a - np3_rule(x)); break;
    default: {
      const int bin = bin_of(boundary_score(id, x), cutoffs(id));
      t = 4.0 * (2.0 - std::abs(a - bin));
    }
    }
    q[a - 1] = mu + t;
  }
  return q;
}

int true_optimal(ScenarioId id, std::span<const double> x)
{
  check_point(id, x);
  switch (id) {
  case ScenarioId::L2: return 0.3 - x[0] - x[1] > 0.0 ? 2 : 1;
  case ScenarioId::N2: return 0.7 - x[0] * x[0] - x[1] * x[1] > 0.0 ? 2 : 1;
  case ScenarioId::NP3: return np3_rule(x);
  default: return bin_of(boundary_score(id, x), cutoffs(id));
  }
}

TreatmentMapRule optimal_rule(ScenarioId id)
{
  return TreatmentMapRule(scenario_levels(id), scenario_dim(id), [id](std::span<const double> x) { return true_optimal(id, x); });
}

LabeledDataset generate(const ScenarioConfig & config)
{
  if (config.n < 1) throw InvalidArgument("scenario sample size must be at least 1");
  const int K = scenario_levels(config.id);
  const int p = scenario_dim(config.id);
  Rng rng(config.seed);

  Eigen::MatrixXd x(config.n, p);
  std::vector<int> a(static_cast<std::size_t>(config.n));
  Eigen::VectorXd r(config.n);
  Eigen::MatrixXd q(config.n, K);
  std::vector<int> truth(static_cast<std::size_t>(config.n));
  Eigen::VectorXd xi(p);
  for (Eigen::Index i = 0; i < config.n; ++i) {
    for (int j = 0; j < p; ++j) xi[j] = rng.uniform(-1.0, 1.0);
    const int ai = rng.integer(1, K);
    const double noise = rng.normal();
    x.row(i) = xi.transpose();
    a[static_cast<std::size_t>(i)] = ai;
    q.row(i) = q_values(config.id, as_span(xi)).transpose();
    r[i] = q(i, ai - 1) + noise;
    truth[static_cast<std::size_t>(i)] = true_optimal(config.id, as_span(xi));
  }
  return {Dataset(std::move(x), std::move(a), std::move(r), K, 1.0 / K), std::move(truth), std::move(q)};
}

}  // namespace ordinal_itr
