#pragma once

/**
 * @file
 * @brief CSV datasets and the versioned plain-text model format.
 *
 * CSV header: x1..xp, treatment, reward, then optional propensity and truth.
 */

#include "ordinal_itr/evaluation.hpp"

#include <filesystem>
#include <iosfwd>

namespace ordinal_itr {

/// Raised for unreadable or unwritable files; the message names the path.
class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Raw CSV contents with the header kept separately.
struct CsvTable
{
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::optional<std::size_t> column(const std::string & name) const;
};

CsvTable read_csv_table(std::istream & in, const std::string & source);
CsvTable read_csv_table(const std::filesystem::path & path);
void write_csv_table(std::ostream & out, const CsvTable & table);
void write_csv_table(const std::filesystem::path & path, const CsvTable & table);

/// Typed view of a table; treatment and reward may be absent for prediction-only files.
struct CsvData
{
  Eigen::MatrixXd x;
  std::optional<std::vector<int>> treatment;
  std::optional<Eigen::VectorXd> reward;
  std::optional<Eigen::VectorXd> propensity;
  std::optional<std::vector<int>> truth;
};

/**
 * Validates the schema and parses values. Errors name the offending column
 * (and line for unparsable cells).
 */
CsvData parse_csv(const CsvTable & table, bool require_outcomes, const std::string & source);
CsvData read_csv(const std::filesystem::path & path, bool require_outcomes = true);

/// Writes x1..xp, treatment, reward, [propensity,] [truth] with 17 significant digits.
void write_dataset_csv(const std::filesystem::path & path, const Dataset & data, const std::vector<int> * truth = nullptr,
                       bool with_propensity = false);

inline constexpr int kModelFormatVersion = 1;

/// A fitted GOWL rule or a pairwise baseline rule, as stored on disk.
struct Model
{
  Method method = Method::Gowl;
  std::vector<FittedRule> rules;  ///< one GOWL rule, or K-1 binary sub-rules
  double shift = 0.0;

  /// The rule object for prediction.
  [[nodiscard]] RulePtr rule() const;
  [[nodiscard]] int levels() const;
};

Model model_from_rule(const Rule & rule);

void save_model(std::ostream & out, const Model & model);
void save_model(const std::filesystem::path & path, const Model & model);
/// Rejects unsupported format versions and malformed blocks.
Model load_model(std::istream & in, const std::string & source);
Model load_model(const std::filesystem::path & path);

}  // namespace ordinal_itr
