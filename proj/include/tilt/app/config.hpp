#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tilt/experiments.hpp"

namespace tilt::app {

inline constexpr int kSchemaVersion = 1;

/// Parses a JSON document into a config. Fields absent from the document
/// keep the defaults of the named experiment; unknown fields and type
/// mismatches raise ConfigError naming the dotted field path.
ExperimentConfig config_from_json(const nlohmann::json& doc);

/// Resolved snapshot: every field written out, `config_from_json` of the
/// result reproduces the same config.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Reads and parses a JSON file; ConfigError("<file>", ...) on I/O or syntax errors.
nlohmann::json read_config_file(const std::string& path);

/// Applies one `dotted.key=value` assignment. The value is parsed as JSON
/// when possible and taken as a string otherwise. Intermediate objects are
/// created as needed.
void apply_override(nlohmann::json& doc, const std::string& assignment);

ExperimentKind parse_experiment_kind(const std::string& name);
Method parse_method(const std::string& name);

nlohmann::json density_to_json(const DensityModel& model);
DensityModel density_from_json(const nlohmann::json& doc, const std::string& path);

}  // namespace tilt::app
