#include "ordinal_itr/cli.hpp"

#include "ordinal_itr/io.hpp"
#include "ordinal_itr/propensity.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <ostream>

namespace ordinal_itr {

namespace {

/// JSON object -> CLI11 config items. Top-level keys address the invoked
/// subcommand (except "threads"); nested objects name a subcommand explicitly.
class JsonConfig : public CLI::Config
{
public:
  explicit JsonConfig(std::string section) : section_(std::move(section)) {}

  std::string to_config(const CLI::App *, bool, bool, std::string) const override { return "{}\n"; }

  std::vector<CLI::ConfigItem> from_config(std::istream & in) const override
  {
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception & e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    for (auto & item : items)
      if (item.parents.empty() && item.name != "threads" && !section_.empty()) item.parents = {section_};
    return items;
  }

private:
  std::string section_;

  static std::string scalar(const nlohmann::json & v)
  {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const nlohmann::json & j, const std::vector<std::string> & parents, std::vector<CLI::ConfigItem> & items)
  {
    for (const auto & [key, v] : j.items()) {
      if (v.is_object()) {
        auto p = parents;
        p.push_back(key);
        collect(v, p, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (v.is_array())
        for (const auto & e : v) item.inputs.push_back(scalar(e));
      else
        item.inputs.push_back(scalar(v));
      items.push_back(std::move(item));
    }
  }
};

struct DataOptions
{
  int levels = 0;
  std::string propensity = "auto";
};

struct MethodOptions
{
  std::string method = "gowl";
  std::string kernel = "linear";
  std::string strategy = "full";
  bool isotonic = false;
  std::optional<double> shift;
  double kkt_tol = 1e-5;
  std::int64_t max_iter = 0;

  [[nodiscard]] MethodSpec spec() const
  {
    MethodSpec m;
    m.method = method_from_string(method);
    m.kernel = kernel_type_from_string(kernel);
    m.strategy = strategy_from_string(strategy);
    m.isotonic = isotonic;
    m.owl_shift = shift;
    m.kkt_tol = kkt_tol;
    m.max_iter = max_iter;
    return m;
  }
};

void add_data_options(CLI::App & cmd, DataOptions & o)
{
  cmd.add_option("--levels", o.levels, "Number of treatment levels K (default: largest observed)");
  cmd.add_option("--propensity", o.propensity, "auto, uniform, empirical, proportional_odds or column")
      ->check(CLI::IsMember({"auto", "uniform", "empirical", "proportional_odds", "column"}));
}

void add_method_options(CLI::App & cmd, MethodOptions & o)
{
  cmd.add_option("--method", o.method, "gowl, owl or pls_l1")->check(CLI::IsMember({"gowl", "owl", "pls_l1"}));
  cmd.add_option("--kernel", o.kernel, "linear or gaussian")->check(CLI::IsMember({"linear", "gaussian"}));
  cmd.add_option("--strategy", o.strategy, "Duplication strategy: full or partial")->check(CLI::IsMember({"full", "partial"}));
  cmd.add_flag("--isotonic", o.isotonic, "Project intercepts onto a non-increasing sequence");
  cmd.add_option("--shift", o.shift, "OWL reward shift (default: -min(r) + 0.1 sd(r))");
  cmd.add_option("--kkt-tol", o.kkt_tol, "Solver KKT tolerance")->check(CLI::PositiveNumber);
  cmd.add_option("--max-iter", o.max_iter, "Solver iteration cap (0: 1000 per duplicated row)")->check(CLI::NonNegativeNumber);
}

struct LoadedData
{
  Dataset data;
  std::optional<std::vector<int>> truth;
};

LoadedData load_dataset(const std::string & path, const DataOptions & o, std::ostream & err)
{
  CsvData csv = read_csv(path, true);
  const auto & a = *csv.treatment;
  int levels = o.levels;
  if (levels == 0)
    for (int v : a) levels = std::max(levels, v);
  const auto n = csv.x.rows();

  std::string source = o.propensity;
  if (source == "auto") source = csv.propensity ? "column" : "uniform";
  Eigen::VectorXd pi;
  if (source == "column") {
    if (!csv.propensity) throw InvalidArgument(path + ": --propensity column needs a 'propensity' column");
    pi = *csv.propensity;
  } else if (source == "uniform") {
    pi = Eigen::VectorXd::Constant(n, 1.0 / levels);
  } else if (source == "empirical") {
    pi = empirical_propensity(a, levels).per_row(csv.x, a);
  } else {
    const PropensityModel m = fit_proportional_odds(csv.x, a, levels);
    if (!m.converged)
      err << fmt::format("warning: proportional-odds fit stopped with gradient norm {:.3g} after {} iterations\n",
                         m.gradient_norm, m.iterations);
    pi = m.per_row(csv.x, a);
  }
  return {Dataset(std::move(csv.x), a, std::move(*csv.reward), std::move(pi), levels), std::move(csv.truth)};
}

bool rules_converged(const Model & m)
{
  for (const auto & r : m.rules)
    if (!r.converged) return false;
  return true;
}

double max_kkt(const Model & m)
{
  double v = 0.0;
  for (const auto & r : m.rules) v = std::max(v, r.kkt_violation);
  return v;
}

MethodSpec parse_bench_method(const std::string & name)
{
  MethodSpec m;
  if (name == "pls_l1") {
    m.method = Method::PlsL1;
    return m;
  }
  const auto dash = name.find('-');
  if (dash == std::string::npos) throw InvalidArgument("method '" + name + "' must look like gowl-linear, owl-gaussian or pls_l1");
  m.method = method_from_string(name.substr(0, dash));
  if (m.method == Method::PlsL1) throw InvalidArgument("pls_l1 takes no kernel suffix");
  m.kernel = kernel_type_from_string(name.substr(dash + 1));
  return m;
}

void print_model_summary(std::ostream & out, const Model & m)
{
  out << fmt::format("method={} levels={} rules={}\n", to_string(m.method), m.levels(), m.rules.size());
  for (std::size_t k = 0; k < m.rules.size(); ++k) {
    const auto & r = m.rules[k];
    out << fmt::format("rule {}: lambda={:.6g} kkt_violation={:.3g} converged={} intercepts=[", k + 1, r.lambda,
                       r.kkt_violation, r.converged);
    for (Eigen::Index j = 0; j < r.intercepts().size(); ++j) out << (j ? ", " : "") << fmt::format("{:.6g}", r.intercepts()[j]);
    out << "]\n";
  }
}

}  // namespace

int run_cli(int argc, const char * const * argv, std::ostream & out, std::ostream & err)
{
  CLI::App app{"Individualized treatment rules for ordinal treatments", "ordinal-itr"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = default_threads();
  app.add_option("--threads", threads, "Worker threads (default: ORDINAL_ITR_THREADS or 1)")->check(CLI::PositiveNumber);

  // simulate
  auto * sim = app.add_subcommand("simulate", "Write train, tune and test CSVs for a benchmark scenario");
  std::string sim_scenario;
  Eigen::Index sim_n = 0;
  std::uint64_t sim_seed = 1;
  int sim_rep = 0;
  std::string sim_dir = ".";
  sim->add_option("--scenario", sim_scenario, "Scenario id (" + valid_scenario_ids() + ")")->required();
  sim->add_option("--n", sim_n, "Training size; tune has n rows and test 10n")->required()->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "Master seed");
  sim->add_option("--replicate", sim_rep, "Replicate index within the master seed")->check(CLI::NonNegativeNumber);
  sim->add_option("--out-dir", sim_dir, "Output directory");

  // fit
  auto * fitc = app.add_subcommand("fit", "Fit a rule on a CSV dataset and save the model");
  std::string fit_data, fit_model;
  std::optional<double> fit_lambda;
  double fit_sigma = 1.0;
  bool allow_unconverged = false;
  DataOptions fit_do;
  MethodOptions fit_mo;
  fitc->add_option("--data", fit_data, "Training CSV")->required();
  fitc->add_option("--model", fit_model, "Output model file")->required();
  fitc->add_option("--lambda", fit_lambda, "Penalty (default 1/n; lasso penalty for pls_l1, default 0.01)")->check(CLI::PositiveNumber);
  fitc->add_option("--sigma", fit_sigma, "Gaussian bandwidth")->check(CLI::PositiveNumber);
  fitc->add_flag("--allow-unconverged", allow_unconverged, "Exit 0 even if the solver stops above the KKT tolerance");
  add_data_options(*fitc, fit_do);
  add_method_options(*fitc, fit_mo);

  // predict
  auto * pred = app.add_subcommand("predict", "Append a predicted_treatment column to a CSV");
  std::string pred_model, pred_data, pred_out;
  pred->add_option("--model", pred_model, "Model file")->required();
  pred->add_option("--data", pred_data, "Input CSV (x1..xp required)")->required();
  pred->add_option("--out", pred_out, "Output CSV")->required();

  // evaluate
  auto * evalc = app.add_subcommand("evaluate", "Empirical value and, with a truth column, MISC");
  std::string eval_model, eval_data;
  bool eval_misc = false;
  DataOptions eval_do;
  evalc->add_option("--model", eval_model, "Model file")->required();
  evalc->add_option("--data", eval_data, "Evaluation CSV")->required();
  evalc->add_flag("--misc", eval_misc, "Require MISC (needs a truth column)");
  add_data_options(*evalc, eval_do);

  // tune
  auto * tunec = app.add_subcommand("tune", "Select a grid cell by tuning-set value and save its model");
  std::string tune_train, tune_set, tune_model, tune_criterion = "value";
  Grid tune_grid;
  DataOptions tune_do;
  MethodOptions tune_mo;
  tunec->add_option("--train", tune_train, "Training CSV")->required();
  tunec->add_option("--tune", tune_set, "Tuning CSV")->required();
  tunec->add_option("--model", tune_model, "Output model file for the chosen cell");
  tunec->add_option("--lambdas", tune_grid.lambda_multipliers, "Multipliers i with lambda = i/n");
  tunec->add_option("--sigmas", tune_grid.sigmas, "Gaussian bandwidths");
  tunec->add_option("--lasso-lambdas", tune_grid.lasso_lambdas, "Lasso penalties for pls_l1");
  tunec->add_option("--criterion", tune_criterion, "value or misc")->check(CLI::IsMember({"value", "misc"}));
  add_data_options(*tunec, tune_do);
  add_method_options(*tunec, tune_mo);

  // bench
  auto * bench = app.add_subcommand("bench", "Run the simulation protocol and print a results table");
  std::vector<std::string> bench_scenarios{"L3"}, bench_methods{"gowl-linear"};
  BenchConfig bench_cfg;
  std::string bench_out, bench_criterion = "value", bench_strategy = "full";
  bench->add_option("--scenarios", bench_scenarios, "Scenario ids")->delimiter(',');
  bench->add_option("--methods", bench_methods, "gowl-linear, gowl-gaussian, owl-linear, owl-gaussian, pls_l1")->delimiter(',');
  bench->add_option("--n", bench_cfg.n, "Training size")->check(CLI::PositiveNumber);
  bench->add_option("--replicates", bench_cfg.replicates, "Replicates")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_cfg.seed, "Master seed");
  bench->add_option("--criterion", bench_criterion, "value or misc")->check(CLI::IsMember({"value", "misc"}));
  bench->add_option("--strategy", bench_strategy, "GOWL duplication strategy")->check(CLI::IsMember({"full", "partial"}));
  bench->add_option("--lambdas", bench_cfg.grid.lambda_multipliers, "Multipliers i with lambda = i/n");
  bench->add_option("--sigmas", bench_cfg.grid.sigmas, "Gaussian bandwidths");
  bench->add_option("--out", bench_out, "Also write the table to this file");

  // crossval
  auto * cv = app.add_subcommand("crossval", "Repeated k-fold cross-validated value");
  std::string cv_data;
  CrossValConfig cv_cfg;
  DataOptions cv_do;
  MethodOptions cv_mo;
  cv->add_option("--data", cv_data, "CSV dataset")->required();
  cv->add_option("--folds", cv_cfg.folds, "Folds")->check(CLI::Range(2, 1000000));
  cv->add_option("--reps", cv_cfg.reps, "Repetitions")->check(CLI::PositiveNumber);
  cv->add_option("--seed", cv_cfg.seed, "Master seed");
  add_data_options(*cv, cv_do);
  add_method_options(*cv, cv_mo);

  std::string section;
  for (int i = 1; i < argc && section.empty(); ++i)
    for (const auto * sub : app.get_subcommands({}))
      if (sub->get_name() == argv[i]) section = sub->get_name();
  app.config_formatter(std::make_shared<JsonConfig>(section));
  app.set_config("--config", "", "JSON object of option values; command-line flags take precedence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::FileError & e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const CLI::ParseError & e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*sim) {
      namespace fs = std::filesystem;
      const ScenarioId id = scenario_from_string(sim_scenario);
      BenchConfig c;
      c.scenario = id;
      c.n = sim_n;
      c.seed = sim_seed;
      std::error_code ec;
      fs::create_directories(sim_dir, ec);
      if (ec) throw IoError("cannot create directory '" + sim_dir + "': " + ec.message());
      const ReplicateData d = replicate_data(c, sim_rep);
      const fs::path dir(sim_dir);
      write_dataset_csv(dir / "train.csv", d.train.data, &d.train.truth);
      write_dataset_csv(dir / "tune.csv", d.tune.data, &d.tune.truth);
      write_dataset_csv(dir / "test.csv", d.test.data, &d.test.truth);
      nlohmann::ordered_json manifest;
      manifest["scenario"] = to_string(id);
      manifest["levels"] = scenario_levels(id);
      manifest["dim"] = scenario_dim(id);
      manifest["seed"] = sim_seed;
      manifest["replicate"] = sim_rep;
      manifest["files"] = {{"train.csv", sim_n}, {"tune.csv", sim_n}, {"test.csv", sim_n * c.test_multiple}};
      manifest["propensity"] = 1.0 / scenario_levels(id);
      std::ofstream m(dir / "manifest.json", std::ios::binary);
      if (!(m << manifest.dump(2) << '\n')) throw IoError("failed writing '" + (dir / "manifest.json").string() + "'");
      out << fmt::format("wrote {}/train.csv, tune.csv, test.csv, manifest.json\n", sim_dir);
      return kExitOk;
    }

    if (*fitc) {
      const LoadedData d = load_dataset(fit_data, fit_do, err);
      const MethodSpec spec = fit_mo.spec();
      GridCell cell;
      cell.lambda = fit_lambda.value_or(spec.method == Method::PlsL1 ? 0.01 : 1.0 / static_cast<double>(d.data.size()));
      cell.sigma = fit_sigma;
      const Model m = model_from_rule(*fit_method(spec, d.data, cell));
      save_model(fit_model, m);
      print_model_summary(out, m);
      if (!rules_converged(m) && !allow_unconverged) {
        err << fmt::format("error: solver stopped with KKT violation {:.3g} above tolerance; model written to {}\n",
                           max_kkt(m), fit_model);
        return kExitNumerical;
      }
      return kExitOk;
    }

    if (*pred) {
      const Model m = load_model(pred_model);
      CsvTable table = read_csv_table(std::filesystem::path(pred_data));
      const CsvData csv = parse_csv(table, false, pred_data);
      const RulePtr rule = m.rule();
      if (csv.x.cols() != rule->dim())
        throw InvalidArgument(fmt::format("{} has {} covariates but the model expects {}", pred_data, csv.x.cols(), rule->dim()));
      if (table.column("predicted_treatment")) throw InvalidArgument(pred_data + " already has a 'predicted_treatment' column");
      const std::vector<int> p = rule->predict(csv.x);
      table.header.push_back("predicted_treatment");
      for (std::size_t i = 0; i < p.size(); ++i) table.rows[i].push_back(std::to_string(p[i]));
      write_csv_table(std::filesystem::path(pred_out), table);
      out << fmt::format("wrote {} predictions to {}\n", p.size(), pred_out);
      return kExitOk;
    }

    if (*evalc) {
      const Model m = load_model(eval_model);
      if (eval_do.levels == 0) eval_do.levels = m.levels();
      const LoadedData d = load_dataset(eval_data, eval_do, err);
      const RulePtr rule = m.rule();
      if (d.data.dim() != rule->dim())
        throw InvalidArgument(fmt::format("{} has {} covariates but the model expects {}", eval_data, d.data.dim(), rule->dim()));
      if (eval_misc && !d.truth)
        throw InvalidArgument(eval_data + " has no 'truth' column, so MISC cannot be computed; omit --misc for value-only evaluation");
      out << fmt::format("value={:.17g}\n", empirical_value(*rule, d.data));
      if (d.truth) out << fmt::format("misc={:.17g}\n", misclassification(*rule, d.data.covariates(), *d.truth));
      return kExitOk;
    }

    if (*tunec) {
      const LoadedData tr = load_dataset(tune_train, tune_do, err);
      DataOptions tdo = tune_do;
      tdo.levels = tr.data.levels();
      const LoadedData ts = load_dataset(tune_set, tdo, err);
      const MethodSpec spec = tune_mo.spec();
      const Criterion crit = tune_criterion == "misc" ? Criterion::Misc : Criterion::Value;
      if (crit == Criterion::Misc && !ts.truth) throw InvalidArgument(tune_set + " needs a 'truth' column for --criterion misc");
      const TuneResult t = tune(tr.data, ts.data, spec, tune_grid.cells(spec, tr.data.size()), crit,
                                ts.truth ? &*ts.truth : nullptr, threads);
      for (std::size_t c = 0; c < t.cells.size(); ++c)
        out << fmt::format("cell {}: {} score={:.6g}\n", c + 1, to_string(t.cells[c]), t.scores[c]);
      for (const auto & f : t.failures) err << "warning: " << f << '\n';
      out << fmt::format("chosen: {} score={:.6g}\n", to_string(t.best), t.score);
      if (!tune_model.empty()) save_model(tune_model, model_from_rule(*t.rule));
      return kExitOk;
    }

    if (*bench) {
      bench_cfg.threads = threads;
      bench_cfg.criterion = bench_criterion == "misc" ? Criterion::Misc : Criterion::Value;
      std::vector<ScenarioId> ids;
      for (const auto & s : bench_scenarios) ids.push_back(scenario_from_string(s));
      std::vector<MethodSpec> methods;
      for (const auto & s : bench_methods) {
        methods.push_back(parse_bench_method(s));
        methods.back().strategy = strategy_from_string(bench_strategy);
      }
      std::vector<EvalReport> reports;
      for (ScenarioId id : ids)
        for (const auto & m : methods) {
          bench_cfg.scenario = id;
          reports.push_back(run_bench(bench_cfg, m));
        }
      const std::string table = format_reports(reports);
      out << table;
      if (!bench_out.empty()) {
        std::ofstream f(bench_out, std::ios::binary);
        if (!(f << table)) throw IoError("failed writing '" + bench_out + "'");
      }
      return kExitOk;
    }

    if (*cv) {
      const LoadedData d = load_dataset(cv_data, cv_do, err);
      cv_cfg.threads = threads;
      const CrossValReport r = cross_validate(d.data, cv_mo.spec(), cv_cfg);
      out << fmt::format("value mean={:.6g} sd={:.6g} folds={} missing={}\n", r.mean(), r.sd(), r.values.size(), r.missing);
      for (const auto & note : r.notes) err << "missing: " << note << '\n';
      return kExitOk;
    }
  } catch (const IoError & e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const InvalidArgument & e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError & e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception & e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace ordinal_itr
