#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "tilt/experiments.hpp"

namespace tilt::app {

/// 17 significant digits; NaN as "nan".
std::string format_real(double value);

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_field(const std::string& text);

void write_trials_csv(std::ostream& out, std::span<const TrialResult> rows);
/// Aggregate rows carry the series label in the method column and the
/// aggregation key as level_or_L, except for lambda-keyed sweeps where the
/// key goes to the trailing lambda column and level_or_L holds the shift
/// level (or kappa).
void write_aggregates_csv(std::ostream& out, const SweepResult& sweep, ExperimentKind kind,
                          double level_or_L);
void write_err_lambda_csv(std::ostream& out, std::span<const ErrLambdaRecord> rows);

/// Minimal RFC 4180 reader: header row plus data rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// Index of a header column; throws DataError when absent.
  std::size_t column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);
double parse_real(const std::string& text);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// UTC timestamp, ISO 8601 with seconds.
std::string utc_timestamp();

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace tilt::app
