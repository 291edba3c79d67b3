#include "ordinal_itr/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <limits>
#include <numeric>
#include <thread>

namespace ordinal_itr {

double misclassification(const Rule & rule, const Eigen::MatrixXd & x, const std::vector<int> & truth)
{
  if (x.rows() == 0) throw InvalidArgument("misclassification needs a non-empty test set");
  if (static_cast<Eigen::Index>(truth.size()) != x.rows()) throw InvalidArgument("truth length differs from test rows");
  const std::vector<int> pred = rule.predict(x);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != truth[i];
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

double empirical_value(const Rule & rule, const Dataset & data)
{
  if (rule.levels() != data.levels()) throw InvalidArgument("rule and data disagree on the number of levels");
  const Eigen::MatrixXd f = rule.decision_matrix(data.covariates());
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const int a = data.treatment(i);
    const double ipw = 1.0 / data.propensity()[i];
    for (int k = 1; k < data.levels(); ++k) {
      if (sign_of(static_cast<double>(a - k)) != sign_of(f(i, k - 1))) continue;
      num += data.reward(i) * ipw;
      den += ipw;
    }
  }
  if (den == 0.0) throw UndefinedValue("value undefined: the rule agrees with no duplicated observation");
  return num / den;
}

double value_mse(const std::vector<std::pair<double, double>> & values)
{
  if (values.empty()) throw InvalidArgument("value_mse needs at least one replicate");
  double s = 0.0;
  for (const auto & [fitted, optimal] : values) s += (fitted - optimal) * (fitted - optimal);
  return s / static_cast<double>(values.size());
}

std::string to_string(Method m)
{
  switch (m) {
  case Method::Gowl: return "gowl";
  case Method::Owl: return "owl";
  case Method::PlsL1: return "pls_l1";
  }
  return "?";
}

Method method_from_string(const std::string & name)
{
  for (Method m : {Method::Gowl, Method::Owl, Method::PlsL1})
    if (to_string(m) == name) return m;
  throw InvalidArgument("unknown method '" + name + "'; valid: gowl, owl, pls_l1");
}

std::string MethodSpec::label() const
{
  switch (method) {
  case Method::Gowl: return kernel == KernelType::Linear ? "GOWL-Linear" : "GOWL-Gaussian";
  case Method::Owl: return kernel == KernelType::Linear ? "OWL-Linear" : "OWL-Gaussian";
  case Method::PlsL1: return "PLS-l1";
  }
  return "?";
}

std::string to_string(const GridCell & cell) { return fmt::format("lambda={:.6g} sigma={:.6g}", cell.lambda, cell.sigma); }

std::vector<GridCell> Grid::cells(const MethodSpec & method, Eigen::Index n) const
{
  if (n < 1) throw InvalidArgument("grid needs a positive training size");
  std::vector<GridCell> out;
  if (method.method == Method::PlsL1) {
    for (double l : lasso_lambdas) out.push_back({l, 1.0});
  } else if (method.kernel == KernelType::Linear) {
    for (double i : lambda_multipliers) out.push_back({i / static_cast<double>(n), 1.0});
  } else {
    for (double s : sigmas)
      for (double i : lambda_multipliers) out.push_back({i / static_cast<double>(n), s});
  }
  if (out.empty()) throw InvalidArgument("tuning grid is empty");
  return out;
}

RulePtr fit_method(const MethodSpec & method, const Dataset & train, const GridCell & cell)
{
  const KernelSpec spec = method.kernel == KernelType::Linear ? KernelSpec::linear() : KernelSpec::gaussian(cell.sigma);
  FitOptions fo;
  fo.strategy = method.strategy;
  fo.isotonic = method.isotonic;
  fo.kkt_tol = method.kkt_tol;
  fo.max_iter = method.max_iter;
  switch (method.method) {
  case Method::Gowl: return std::make_shared<FittedRule>(fit(train, cell.lambda, spec, fo));
  case Method::Owl: {
    OwlOptions oo;
    oo.shift = method.owl_shift;
    oo.fit = fo;
    return std::make_shared<BaselineRule>(fit_owl(train, cell.lambda, spec, oo));
  }
  case Method::PlsL1: return std::make_shared<BaselineRule>(fit_pls_l1(train, cell.lambda));
  }
  throw InvalidArgument("unknown method");
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)> & fn)
{
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < count;) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto & t : pool) t.join();
  for (auto & e : errors)
    if (e) std::rethrow_exception(e);
}

int default_threads()
{
  if (const char * env = std::getenv("ORDINAL_ITR_THREADS")) {
    char * end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  return 1;
}

TuneResult tune(const Dataset & train, const Dataset & tune_set, const MethodSpec & method,
                const std::vector<GridCell> & cells, Criterion criterion, const std::vector<int> * tune_truth,
                int threads)
{
  if (cells.empty()) throw InvalidArgument("tuning grid is empty");
  if (criterion == Criterion::Misc && (tune_truth == nullptr || static_cast<Eigen::Index>(tune_truth->size()) != tune_set.size()))
    throw InvalidArgument("MISC tuning needs a truth label for every tuning row");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<RulePtr> rules(cells.size());
  std::vector<double> scores(cells.size(), nan);
  std::vector<std::string> errors(cells.size());
  parallel_for(cells.size(), threads, [&](std::size_t c) {
    try {
      RulePtr r = fit_method(method, train, cells[c]);
      scores[c] = criterion == Criterion::Value ? empirical_value(*r, tune_set)
                                                : -misclassification(*r, tune_set.covariates(), *tune_truth);
      rules[c] = std::move(r);
    } catch (const std::exception & e) {
      errors[c] = e.what();
    }
  });

  TuneResult out;
  out.cells = cells;
  out.scores = scores;
  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (!rules[c]) {
      out.failures.push_back(to_string(cells[c]) + ": " + errors[c]);
      continue;
    }
    if (!best || scores[c] > scores[*best] || (scores[c] == scores[*best] && cells[c].lambda > cells[*best].lambda)) best = c;
  }
  if (!best) {
    std::string msg = "every tuning cell failed:";
    for (const auto & f : out.failures) msg += "\n  " + f;
    throw NumericalError(msg);
  }
  out.best = cells[*best];
  out.rule = rules[*best];
  out.score = scores[*best];
  return out;
}

double mean_of(const std::vector<double> & v)
{
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double> & v)
{
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

namespace {

std::vector<double> collect(const std::vector<ReplicateResult> & reps, double (*field)(const ReplicateResult &))
{
  std::vector<double> out;
  for (const auto & r : reps)
    if (r.ok) out.push_back(field(r));
  return out;
}

double misc_of(const ReplicateResult & r) { return r.misc; }
double gap2_of(const ReplicateResult & r) { return (r.value_fitted - r.value_optimal) * (r.value_fitted - r.value_optimal); }

}  // namespace

std::size_t EvalReport::succeeded() const
{
  return static_cast<std::size_t>(std::count_if(replicates.begin(), replicates.end(), [](const auto & r) { return r.ok; }));
}

double EvalReport::misc_mean() const { return mean_of(collect(replicates, misc_of)); }
double EvalReport::misc_sd() const { return sd_of(collect(replicates, misc_of)); }
double EvalReport::value_mse() const { return mean_of(collect(replicates, gap2_of)); }
double EvalReport::value_mse_sd() const { return sd_of(collect(replicates, gap2_of)); }

ReplicateData replicate_data(const BenchConfig & config, int replicate)
{
  const auto r = static_cast<std::uint64_t>(replicate);
  const auto seed = [&](StreamRole role) { return derive_seed(config.seed, r, static_cast<std::uint64_t>(role)); };
  return {generate({config.scenario, config.n, seed(StreamRole::Train)}),
          generate({config.scenario, config.n, seed(StreamRole::Tune)}),
          generate({config.scenario, config.n * config.test_multiple, seed(StreamRole::Test)})};
}

EvalReport run_bench(const BenchConfig & config, const MethodSpec & method)
{
  if (config.replicates < 1) throw InvalidArgument("bench needs at least one replicate");
  if (config.test_multiple < 1) throw InvalidArgument("test multiple must be positive");
  EvalReport report;
  report.scenario = to_string(config.scenario);
  report.method = method.label();
  report.n = config.n;
  report.replicates.resize(static_cast<std::size_t>(config.replicates));
  const auto cells = config.grid.cells(method, config.n);
  const TreatmentMapRule optimal = optimal_rule(config.scenario);

  parallel_for(report.replicates.size(), config.threads, [&](std::size_t r) {
    ReplicateResult & out = report.replicates[r];
    try {
      const ReplicateData d = replicate_data(config, static_cast<int>(r));
      const TuneResult t = tune(d.train.data, d.tune.data, method, cells, config.criterion, &d.tune.truth);
      out.chosen = t.best;
      out.misc = misclassification(*t.rule, d.test.data.covariates(), d.test.truth);
      out.value_fitted = empirical_value(*t.rule, d.test.data);
      out.value_optimal = empirical_value(optimal, d.test.data);
      out.ok = true;
    } catch (const std::exception & e) {
      out.error = e.what();
    }
  });
  return report;
}

std::string format_reports(const std::vector<EvalReport> & reports)
{
  std::string out = fmt::format("{:<9}{:>6}  {:<14}{:>20}{:>24}{:>8}\n", "scenario", "n", "method", "MISC mean (sd)",
                                "value-MSE mean (sd)", "reps");
  bool flagged = false;
  for (const auto & r : reports) {
    const bool single = r.single_replicate();
    flagged = flagged || single;
    const std::string mark = single ? "*" : "";
    out += fmt::format("{:<9}{:>6}  {:<14}{:>20}{:>24}{:>8}\n", r.scenario, r.n, r.method,
                       fmt::format("{:.3f} ({:.3f}){}", r.misc_mean(), r.misc_sd(), mark),
                       fmt::format("{:.3f} ({:.3f}){}", r.value_mse(), r.value_mse_sd(), mark),
                       fmt::format("{}/{}", r.succeeded(), r.replicates.size()));
    for (std::size_t i = 0; i < r.replicates.size(); ++i)
      if (!r.replicates[i].ok) out += fmt::format("  replicate {} failed: {}\n", i, r.replicates[i].error);
  }
  if (flagged) out += "* fewer than two successful replicates; sd reported as 0\n";
  return out;
}

double CrossValReport::mean() const { return mean_of(values); }
double CrossValReport::sd() const { return sd_of(values); }

namespace {

std::vector<Eigen::Index> permutation(Eigen::Index n, std::uint64_t seed)
{
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng(seed);
  // Fisher-Yates with the portable integer draw
  for (Eigen::Index i = n - 1; i > 0; --i) std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(rng.integer(0, static_cast<int>(i)))]);
  return idx;
}

}  // namespace

CrossValReport cross_validate(const Dataset & data, const MethodSpec & method, const CrossValConfig & config)
{
  if (config.folds < 2) throw InvalidArgument("cross-validation needs at least 2 folds");
  if (config.reps < 1) throw InvalidArgument("cross-validation needs at least 1 repetition");
  if (data.size() < config.folds) throw InvalidArgument("fewer observations than folds");
  if (!(config.inner_fraction > 0.0 && config.inner_fraction < 1.0)) throw InvalidArgument("inner fraction must lie in (0, 1)");

  const auto folds = static_cast<std::size_t>(config.folds);
  const std::size_t jobs = static_cast<std::size_t>(config.reps) * folds;
  std::vector<double> values(jobs, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> notes(jobs);

  parallel_for(jobs, config.threads, [&](std::size_t job) {
    const std::size_t rep = job / folds, fold = job % folds;
    try {
      const auto order = permutation(data.size(), derive_seed(config.seed, rep, static_cast<std::uint64_t>(StreamRole::CrossVal)));
      std::vector<Eigen::Index> train_idx, test_idx;
      for (std::size_t i = 0; i < order.size(); ++i) (i % folds == fold ? test_idx : train_idx).push_back(order[i]);

      const auto inner = permutation(static_cast<Eigen::Index>(train_idx.size()),
                                     derive_seed(config.seed, job, static_cast<std::uint64_t>(StreamRole::InnerSplit)));
      const auto n_fit = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::lround(config.inner_fraction * static_cast<double>(train_idx.size()))), 1,
          train_idx.size() - 1);
      std::vector<Eigen::Index> fit_idx, tune_idx;
      for (std::size_t i = 0; i < inner.size(); ++i)
        (i < n_fit ? fit_idx : tune_idx).push_back(train_idx[static_cast<std::size_t>(inner[i])]);

      const Dataset fit_part = data.subset(fit_idx);
      const TuneResult t = tune(fit_part, data.subset(tune_idx), method, config.grid.cells(method, fit_part.size()));
      const Dataset train = data.subset(train_idx);
      GridCell cell = t.best;
      // lambda = i/n is rescaled to the full training size
      if (method.method != Method::PlsL1) cell.lambda *= static_cast<double>(fit_part.size()) / static_cast<double>(train.size());
      values[job] = empirical_value(*fit_method(method, train, cell), data.subset(test_idx));
    } catch (const std::exception & e) {
      notes[job] = fmt::format("rep {} fold {}: {}", rep, fold, e.what());
    }
  });

  CrossValReport out;
  for (std::size_t j = 0; j < jobs; ++j) {
    if (std::isnan(values[j])) {
      ++out.missing;
      out.notes.push_back(notes[j]);
    } else {
      out.values.push_back(values[j]);
    }
  }
  return out;
}

}  // namespace ordinal_itr
