#include "ordinal_itr/io.hpp"

#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

namespace ordinal_itr {

namespace {

std::string trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string & line)
{
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string & s, const std::string & where)
{
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw InvalidArgument(where + ": '" + s + "' is not a number");
  return v;
}

int parse_int(const std::string & s, const std::string & where)
{
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw InvalidArgument(where + ": '" + s + "' is not an integer");
  return v;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::ofstream open_out(const std::filesystem::path & path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

}  // namespace

std::optional<std::size_t> CsvTable::column(const std::string & name) const
{
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return j;
  return std::nullopt;
}

CsvTable read_csv_table(std::istream & in, const std::string & source)
{
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw InvalidArgument(fmt::format("{} line {}: expected {} fields, found {}", source, lineno, t.header.size(), cells.size()));
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw InvalidArgument(source + ": missing header line");
  return t;
}

CsvTable read_csv_table(const std::filesystem::path & path)
{
  auto in = open_in(path);
  return read_csv_table(in, path.string());
}

void write_csv_table(std::ostream & out, const CsvTable & table)
{
  const auto row = [&](const std::vector<std::string> & cells) {
    for (std::size_t j = 0; j < cells.size(); ++j) out << (j ? "," : "") << cells[j];
    out << '\n';
  };
  row(table.header);
  for (const auto & r : table.rows) row(r);
}

void write_csv_table(const std::filesystem::path & path, const CsvTable & table)
{
  auto out = open_out(path);
  write_csv_table(out, table);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

CsvData parse_csv(const CsvTable & table, bool require_outcomes, const std::string & source)
{
  std::size_t p = 0;
  while (p < table.header.size() && table.header[p] == "x" + std::to_string(p + 1)) ++p;
  if (p == 0) throw InvalidArgument(source + ": first column must be 'x1', found '" + table.header.front() + "'");

  std::optional<std::size_t> col_a, col_r, col_pi, col_truth;
  for (std::size_t j = p; j < table.header.size(); ++j) {
    const std::string & h = table.header[j];
    std::optional<std::size_t> * slot = h == "treatment" ? &col_a
                                        : h == "reward"   ? &col_r
                                        : h == "propensity" ? &col_pi
                                        : h == "truth"      ? &col_truth
                                                            : nullptr;
    if (slot == nullptr)
      throw InvalidArgument(source + ": unexpected column '" + h + "' (expected x" + std::to_string(p + 1) +
                            ", treatment, reward, propensity or truth)");
    if (slot->has_value()) throw InvalidArgument(source + ": duplicate column '" + h + "'");
    *slot = j;
  }
  if (require_outcomes && !col_a) throw InvalidArgument(source + ": missing required column 'treatment'");
  if (require_outcomes && !col_r) throw InvalidArgument(source + ": missing required column 'reward'");
  if (table.rows.empty()) throw InvalidArgument(source + ": no data rows");

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  CsvData d;
  d.x.resize(n, static_cast<Eigen::Index>(p));
  const auto where = [&](std::size_t i, std::size_t j) {
    return fmt::format("{} line {} column '{}'", source, i + 2, table.header[j]);
  };
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    for (std::size_t j = 0; j < p; ++j) d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_double(table.rows[i][j], where(i, j));

  const auto ints = [&](std::size_t j) {
    std::vector<int> v(table.rows.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = parse_int(table.rows[i][j], where(i, j));
    return v;
  };
  const auto reals = [&](std::size_t j) {
    Eigen::VectorXd v(n);
    for (std::size_t i = 0; i < table.rows.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_double(table.rows[i][j], where(i, j));
    return v;
  };
  if (col_a) d.treatment = ints(*col_a);
  if (col_r) d.reward = reals(*col_r);
  if (col_pi) d.propensity = reals(*col_pi);
  if (col_truth) d.truth = ints(*col_truth);
  return d;
}

CsvData read_csv(const std::filesystem::path & path, bool require_outcomes)
{
  return parse_csv(read_csv_table(path), require_outcomes, path.string());
}

void write_dataset_csv(const std::filesystem::path & path, const Dataset & data, const std::vector<int> * truth,
                       bool with_propensity)
{
  auto out = open_out(path);
  for (Eigen::Index j = 0; j < data.dim(); ++j) out << 'x' << j + 1 << ',';
  out << "treatment,reward" << (with_propensity ? ",propensity" : "") << (truth ? ",truth" : "") << '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.dim(); ++j) out << num(data.covariates()(i, j)) << ',';
    out << data.treatment(i) << ',' << num(data.reward(i));
    if (with_propensity) out << ',' << num(data.propensity()[i]);
    if (truth) out << ',' << (*truth)[static_cast<std::size_t>(i)];
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

RulePtr Model::rule() const
{
  if (rules.empty()) throw InvalidArgument("model has no rules");
  if (method == Method::Gowl) return std::make_shared<FittedRule>(rules.front());
  return std::make_shared<BaselineRule>(method == Method::Owl ? BaselineMethod::Owl : BaselineMethod::PlsL1, rules, shift);
}

int Model::levels() const { return method == Method::Gowl ? rules.front().levels() : static_cast<int>(rules.size()) + 1; }

Model model_from_rule(const Rule & rule)
{
  Model m;
  if (const auto * f = dynamic_cast<const FittedRule *>(&rule)) {
    m.rules = {*f};
  } else if (const auto * b = dynamic_cast<const BaselineRule *>(&rule)) {
    m.method = b->method() == BaselineMethod::Owl ? Method::Owl : Method::PlsL1;
    m.rules = b->subrules();
    m.shift = b->shift();
  } else {
    throw InvalidArgument("only fitted rules can be saved");
  }
  return m;
}

namespace {

void write_block(std::ostream & out, const std::string & name, const Eigen::MatrixXd & m)
{
  out << "block " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << num(m(i, j));
    out << '\n';
  }
}

class ModelReader
{
public:
  ModelReader(std::istream & in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next()
  {
    while (std::getline(in_, line_)) {
      ++lineno_;
      line_ = trim(line_);
      if (!line_.empty() && line_[0] != '#') return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string & what) const
  {
    throw InvalidArgument(fmt::format("{} line {}: {}", source_, lineno_, what));
  }

  std::string value(const std::string & key)
  {
    if (!next()) fail("unexpected end of file, expected '" + key + "'");
    const auto eq = line_.find('=');
    if (eq == std::string::npos || line_.substr(0, eq) != key) fail("expected '" + key + "=...', found '" + line_ + "'");
    return line_.substr(eq + 1);
  }

  double real(const std::string & key) { return parse_double(value(key), where(key)); }
  int integer(const std::string & key) { return parse_int(value(key), where(key)); }

  Eigen::MatrixXd block(const std::string & name, std::optional<Eigen::Index> cols = std::nullopt)
  {
    if (!next()) fail("unexpected end of file, expected block '" + name + "'");
    std::istringstream head(line_);
    std::string tag, got;
    Eigen::Index r = -1, c = -1;
    head >> tag >> got >> r >> c;
    if (tag != "block" || got != name || r < 0 || c < 0) fail("expected 'block " + name + " <rows> <cols>', found '" + line_ + "'");
    if (cols && c != *cols) fail(fmt::format("block {} has {} columns, expected {}", name, c, *cols));
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      if (!next()) fail("block " + name + " is truncated");
      std::istringstream row(line_);
      for (Eigen::Index j = 0; j < c; ++j) {
        std::string cell;
        if (!(row >> cell)) fail("block " + name + " row has too few values");
        m(i, j) = parse_double(cell, where(name));
      }
      std::string extra;
      if (row >> extra) fail("block " + name + " row has too many values");
    }
    return m;
  }

private:
  std::string where(const std::string & key) const { return fmt::format("{} line {} ({})", source_, lineno_, key); }

  std::istream & in_;
  std::string source_;
  std::string line_;
  std::size_t lineno_ = 0;
};

}  // namespace

void save_model(std::ostream & out, const Model & model)
{
  out << "format_version=" << kModelFormatVersion << '\n';
  out << "method=" << to_string(model.method) << '\n';
  out << "levels=" << model.levels() << '\n';
  out << "dim=" << model.rules.front().dim() << '\n';
  out << "shift=" << num(model.shift) << '\n';
  out << "rules=" << model.rules.size() << '\n';
  for (const auto & r : model.rules) {
    out << "kind=" << (r.kind() == RuleKind::Linear ? "linear" : "kernel") << '\n';
    out << "kernel=" << to_string(r.kernel_spec().type) << '\n';
    out << "sigma=" << num(r.kernel_spec().sigma) << '\n';
    out << "lambda=" << num(r.lambda) << '\n';
    out << "C=" << num(r.C) << '\n';
    out << "kkt_violation=" << num(r.kkt_violation) << '\n';
    out << "converged=" << (r.converged ? 1 : 0) << '\n';
    write_block(out, "intercepts", r.intercepts());
    if (r.kind() == RuleKind::Linear) {
      write_block(out, "beta", r.beta());
    } else {
      Eigen::MatrixXd sc(r.support().rows(), r.support().cols() + 1);
      sc << r.coeffs(), r.support();
      write_block(out, "support", sc);
    }
  }
}

void save_model(const std::filesystem::path & path, const Model & model)
{
  auto out = open_out(path);
  save_model(out, model);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Model load_model(std::istream & in, const std::string & source)
{
  ModelReader rd(in, source);
  const int version = rd.integer("format_version");
  if (version != kModelFormatVersion)
    rd.fail(fmt::format("unsupported model format_version {} (this build reads {})", version, kModelFormatVersion));
  Model m;
  try {
    m.method = method_from_string(rd.value("method"));
  } catch (const InvalidArgument & e) {
    rd.fail(e.what());
  }
  const int levels = rd.integer("levels");
  const int dim = rd.integer("dim");
  m.shift = rd.real("shift");
  const int count = rd.integer("rules");
  const int expected = m.method == Method::Gowl ? 1 : levels - 1;
  if (levels < 2 || dim < 1 || count != expected) rd.fail("inconsistent levels/dim/rules header");
  for (int k = 0; k < count; ++k) {
    const std::string kind = rd.value("kind");
    if (kind != "linear" && kind != "kernel") rd.fail("unknown rule kind '" + kind + "'");
    KernelSpec spec;
    try {
      spec.type = kernel_type_from_string(rd.value("kernel"));
    } catch (const InvalidArgument & e) {
      rd.fail(e.what());
    }
    spec.sigma = rd.real("sigma");
    const double lambda = rd.real("lambda");
    const double C = rd.real("C");
    const double kkt = rd.real("kkt_violation");
    const int converged = rd.integer("converged");
    const Eigen::VectorXd b = rd.block("intercepts", 1).col(0);
    if (b.size() != (m.method == Method::Gowl ? levels - 1 : 1)) rd.fail("intercept count does not match levels");
    FittedRule r;
    if (kind == "linear") {
      const Eigen::VectorXd beta = rd.block("beta", 1).col(0);
      if (beta.size() != dim) rd.fail("beta length does not match dim");
      r = FittedRule::linear(beta, b);
    } else {
      const Eigen::MatrixXd sc = rd.block("support", dim + 1);
      r = FittedRule::kernel(spec, sc.rightCols(dim), sc.col(0), b);
    }
    r.lambda = lambda;
    r.C = C;
    r.kkt_violation = kkt;
    r.converged = converged != 0;
    m.rules.push_back(std::move(r));
  }
  return m;
}

Model load_model(const std::filesystem::path & path)
{
  auto in = open_in(path);
  return load_model(in, path.string());
}

}  // namespace ordinal_itr
