#include "tilt/app/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "tilt/errors.hpp"

namespace tilt::app {
namespace {

using nlohmann::json;

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& known) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) throw ConfigError(join(path, key), "unknown field");
  }
}

const json& require_object(const json& doc, const std::string& path) {
  if (!doc.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  return doc;
}

double get_real(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

long long get_int(const json& v, const std::string& path) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<long long>(d);
  }
  throw ConfigError(path, "expected an integer");
}

std::size_t get_count(const json& v, const std::string& path) {
  const long long n = get_int(v, path);
  if (n < 0) throw ConfigError(path, "expected a nonnegative integer");
  return static_cast<std::size_t>(n);
}

std::vector<double> get_reals(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(get_real(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<int> get_ints(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(static_cast<int>(get_int(v[i], path + "[" + std::to_string(i) + "]")));
  }
  return out;
}

/// Either an explicit array or {"log10_min", "log10_max", "count"}.
std::vector<double> get_grid(const json& v, const std::string& path) {
  if (v.is_array()) return get_reals(v, path);
  if (v.is_object()) {
    reject_unknown(v, path, {"log10_min", "log10_max", "count"});
    for (const char* key : {"log10_min", "log10_max", "count"}) {
      if (!v.contains(key)) throw ConfigError(join(path, key), "missing field");
    }
    const std::size_t count = get_count(v["count"], join(path, "count"));
    if (count == 0) throw ConfigError(join(path, "count"), "must be positive");
    return ExperimentConfig::log_grid(get_real(v["log10_min"], join(path, "log10_min")),
                                      get_real(v["log10_max"], join(path, "log10_max")), count);
  }
  throw ConfigError(path, "expected an array or a log-grid object");
}

/// Either an explicit array of levels or {"count": k} for k equally spaced levels.
std::vector<double> get_levels(const json& v, const std::string& path) {
  if (v.is_array()) return get_reals(v, path);
  if (v.is_object()) {
    reject_unknown(v, path, {"count"});
    if (!v.contains("count")) throw ConfigError(join(path, "count"), "missing field");
    const std::size_t count = get_count(v["count"], join(path, "count"));
    if (count == 0) throw ConfigError(join(path, "count"), "must be positive");
    return ShiftPath::equally_spaced_levels(count);
  }
  throw ConfigError(path, "expected an array or {\"count\": k}");
}

void read_truth(const json& doc, const std::string& path, LinearTruth& t) {
  require_object(doc, path);
  reject_unknown(doc, path,
                 {"legendre_coeffs", "bump_amplitude", "bump_center", "bump_width",
                  "bump_frequency"});
  if (doc.contains("legendre_coeffs")) {
    t.legendre_coeffs = get_reals(doc["legendre_coeffs"], join(path, "legendre_coeffs"));
    if (t.legendre_coeffs.empty()) {
      throw ConfigError(join(path, "legendre_coeffs"), "must be nonempty");
    }
  }
  if (doc.contains("bump_amplitude")) {
    t.bump_amplitude = get_real(doc["bump_amplitude"], join(path, "bump_amplitude"));
  }
  if (doc.contains("bump_center")) t.bump_center = get_real(doc["bump_center"], join(path, "bump_center"));
  if (doc.contains("bump_width")) {
    t.bump_width = get_real(doc["bump_width"], join(path, "bump_width"));
    if (!(t.bump_width > 0.0)) throw ConfigError(join(path, "bump_width"), "must be positive");
  }
  if (doc.contains("bump_frequency")) {
    t.bump_frequency = get_real(doc["bump_frequency"], join(path, "bump_frequency"));
  }
}

void read_linear(const json& doc, const std::string& path, LinearShiftSettings& s) {
  require_object(doc, path);
  reject_unknown(doc, path,
                 {"target", "source_endpoint", "levels", "f_degree", "rbf_count", "rbf_bandwidth",
                  "truth", "sensitivity_level", "kernel_rulsif_lambdas"});
  if (doc.contains("target")) s.target = density_from_json(doc["target"], join(path, "target"));
  if (doc.contains("source_endpoint")) {
    s.source_endpoint = density_from_json(doc["source_endpoint"], join(path, "source_endpoint"));
  }
  if (doc.contains("levels")) s.levels = get_levels(doc["levels"], join(path, "levels"));
  if (doc.contains("f_degree")) {
    s.f_degree = static_cast<int>(get_int(doc["f_degree"], join(path, "f_degree")));
  }
  if (doc.contains("rbf_count")) {
    s.rbf_count = static_cast<int>(get_int(doc["rbf_count"], join(path, "rbf_count")));
  }
  if (doc.contains("rbf_bandwidth")) {
    s.rbf_bandwidth = get_real(doc["rbf_bandwidth"], join(path, "rbf_bandwidth"));
  }
  if (doc.contains("truth")) read_truth(doc["truth"], join(path, "truth"), s.truth);
  if (doc.contains("sensitivity_level")) {
    s.sensitivity_level = get_real(doc["sensitivity_level"], join(path, "sensitivity_level"));
  }
  if (doc.contains("kernel_rulsif_lambdas")) {
    s.kernel_rulsif_lambdas =
        get_reals(doc["kernel_rulsif_lambdas"], join(path, "kernel_rulsif_lambdas"));
  }
}

void read_pointmass(const json& doc, const std::string& path, PointMassSettings& s) {
  require_object(doc, path);
  reject_unknown(doc, path,
                 {"n_grid", "L_grid", "smoothness", "series_terms", "b_multipliers", "b_dim_cap",
                  "target_ratio", "erm_dim_rule", "quad_points"});
  if (doc.contains("n_grid")) s.n_grid = get_ints(doc["n_grid"], join(path, "n_grid"));
  if (doc.contains("L_grid")) s.L_grid = get_ints(doc["L_grid"], join(path, "L_grid"));
  if (doc.contains("smoothness")) s.smoothness = get_real(doc["smoothness"], join(path, "smoothness"));
  if (doc.contains("series_terms")) {
    s.series_terms = static_cast<int>(get_int(doc["series_terms"], join(path, "series_terms")));
  }
  if (doc.contains("b_multipliers")) {
    s.b_multipliers = get_ints(doc["b_multipliers"], join(path, "b_multipliers"));
  }
  if (doc.contains("b_dim_cap")) {
    s.b_dim_cap = static_cast<int>(get_int(doc["b_dim_cap"], join(path, "b_dim_cap")));
  }
  if (doc.contains("target_ratio")) {
    s.target_ratio = get_real(doc["target_ratio"], join(path, "target_ratio"));
  }
  if (doc.contains("erm_dim_rule")) {
    const auto& v = doc["erm_dim_rule"];
    const std::string key = join(path, "erm_dim_rule");
    if (!v.is_string()) throw ConfigError(key, "expected \"nominal\" or \"effective\"");
    const auto name = v.get<std::string>();
    if (name == "nominal") {
      s.erm_dim_rule = ErmDimRule::Nominal;
    } else if (name == "effective") {
      s.erm_dim_rule = ErmDimRule::Effective;
    } else {
      throw ConfigError(key, "expected \"nominal\" or \"effective\"");
    }
  }
  if (doc.contains("quad_points")) {
    s.quad_points = static_cast<int>(get_int(doc["quad_points"], join(path, "quad_points")));
  }
}

void read_bounded(const json& doc, const std::string& path, BoundedRatioSettings& s) {
  require_object(doc, path);
  reject_unknown(doc, path, {"kappa", "dims", "truth_coeffs", "quad_points"});
  if (doc.contains("kappa")) s.kappa = get_real(doc["kappa"], join(path, "kappa"));
  if (doc.contains("dims")) {
    const auto& v = doc["dims"];
    const std::string key = join(path, "dims");
    if (!v.is_array()) throw ConfigError(key, "expected an array of [d_f, d_b] pairs");
    s.dims.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string item = key + "[" + std::to_string(i) + "]";
      const auto pair = get_ints(v[i], item);
      if (pair.size() != 2) throw ConfigError(item, "expected [d_f, d_b]");
      s.dims.emplace_back(pair[0], pair[1]);
    }
  }
  if (doc.contains("truth_coeffs")) {
    s.truth_coeffs = get_reals(doc["truth_coeffs"], join(path, "truth_coeffs"));
  }
  if (doc.contains("quad_points")) {
    s.quad_points = static_cast<int>(get_int(doc["quad_points"], join(path, "quad_points")));
  }
}

}  // namespace

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (auto kind : {ExperimentKind::LinearShiftSweep, ExperimentKind::LambdaSensitivity,
                    ExperimentKind::PointMassRate, ExperimentKind::BoundedRatioSweep}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("experiment", "unknown experiment \"" + name + "\"");
}

Method parse_method(const std::string& name) {
  for (auto m : {Method::SourceERM, Method::ExactIW, Method::ExactRuLSIF, Method::KernelRuLSIF,
                 Method::TILT}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("methods", "unknown method \"" + name + "\"");
}

nlohmann::json density_to_json(const DensityModel& model) {
  switch (model.kind()) {
    case DensityModel::Kind::Beta:
      return {{"kind", "beta"}, {"a", model.beta_a()}, {"b", model.beta_b()}};
    case DensityModel::Kind::Uniform01:
      return {{"kind", "uniform"}};
    case DensityModel::Kind::TiltedCosine:
      return {{"kind", "tilted_cosine"}, {"kappa", model.kappa()}};
    case DensityModel::Kind::AtomMixture: {
      const auto atoms = model.atoms();
      return {{"kind", "atom_mixture"},
              {"location", atoms.empty() ? 0.0 : atoms.front().location},
              {"mass", model.total_atom_mass()},
              {"continuous", density_to_json(model.continuous_part())}};
    }
  }
  return {};
}

DensityModel density_from_json(const nlohmann::json& doc, const std::string& path) {
  require_object(doc, path);
  if (!doc.contains("kind") || !doc["kind"].is_string()) {
    throw ConfigError(join(path, "kind"), "expected a density kind string");
  }
  const auto kind = doc["kind"].get<std::string>();
  auto need = [&](const char* key) -> const json& {
    if (!doc.contains(key)) throw ConfigError(join(path, key), "missing field");
    return doc[key];
  };
  try {
    if (kind == "beta") {
      reject_unknown(doc, path, {"kind", "a", "b"});
      return DensityModel::beta(get_real(need("a"), join(path, "a")),
                                get_real(need("b"), join(path, "b")));
    }
    if (kind == "uniform") {
      reject_unknown(doc, path, {"kind"});
      return DensityModel::uniform();
    }
    if (kind == "tilted_cosine") {
      reject_unknown(doc, path, {"kind", "kappa"});
      return DensityModel::tilted_cosine(get_real(need("kappa"), join(path, "kappa")));
    }
    if (kind == "atom_mixture") {
      reject_unknown(doc, path, {"kind", "location", "mass", "continuous"});
      return DensityModel::atom_mixture(
          get_real(need("location"), join(path, "location")),
          get_real(need("mass"), join(path, "mass")),
          density_from_json(need("continuous"), join(path, "continuous")));
    }
  } catch (const DomainError& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(join(path, "kind"), "unknown density kind \"" + kind + "\"");
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
  require_object(doc, "");
  reject_unknown(doc, "",
                 {"schema_version", "experiment", "n_source", "n_target", "n_test", "trials",
                  "noise_sd", "lambda_grid", "methods", "seed", "ridge_f", "ridge_b", "linear",
                  "pointmass", "bounded"});
  if (!doc.contains("experiment") || !doc["experiment"].is_string()) {
    throw ConfigError("experiment", "missing or not a string");
  }
  if (doc.contains("schema_version")) {
    const long long v = get_int(doc["schema_version"], "schema_version");
    if (v != kSchemaVersion) {
      throw ConfigError("schema_version", "unsupported version " + std::to_string(v));
    }
  }
  ExperimentConfig cfg =
      ExperimentConfig::defaults(parse_experiment_kind(doc["experiment"].get<std::string>()));
  if (doc.contains("n_source")) cfg.n_source = get_count(doc["n_source"], "n_source");
  if (doc.contains("n_target")) cfg.n_target = get_count(doc["n_target"], "n_target");
  if (doc.contains("n_test")) cfg.n_test = get_count(doc["n_test"], "n_test");
  if (doc.contains("trials")) cfg.trials = get_count(doc["trials"], "trials");
  if (doc.contains("noise_sd")) cfg.noise_sd = get_real(doc["noise_sd"], "noise_sd");
  if (doc.contains("lambda_grid")) cfg.lambda_grid = get_grid(doc["lambda_grid"], "lambda_grid");
  if (doc.contains("methods")) {
    const auto& v = doc["methods"];
    if (!v.is_array()) throw ConfigError("methods", "expected an array of method names");
    cfg.methods.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string item = "methods[" + std::to_string(i) + "]";
      if (!v[i].is_string()) throw ConfigError(item, "expected a method name");
      const Method m = parse_method(v[i].get<std::string>());
      if (cfg.uses(m)) throw ConfigError(item, "duplicate method");
      cfg.methods.push_back(m);
    }
  }
  if (doc.contains("seed")) {
    const auto& v = doc["seed"];
    if (v.is_number_unsigned()) {
      cfg.seed = v.get<std::uint64_t>();
    } else if (v.is_number_integer() && v.get<long long>() >= 0) {
      cfg.seed = static_cast<std::uint64_t>(v.get<long long>());
    } else {
      throw ConfigError("seed", "expected a nonnegative 64-bit integer");
    }
  }
  if (doc.contains("ridge_f")) cfg.ridge_f = get_real(doc["ridge_f"], "ridge_f");
  if (doc.contains("ridge_b")) cfg.ridge_b = get_real(doc["ridge_b"], "ridge_b");
  if (doc.contains("linear")) read_linear(doc["linear"], "linear", cfg.linear);
  if (doc.contains("pointmass")) read_pointmass(doc["pointmass"], "pointmass", cfg.pointmass);
  if (doc.contains("bounded")) read_bounded(doc["bounded"], "bounded", cfg.bounded);

  if (cfg.trials < 1) throw ConfigError("trials", "must be at least 1");
  if (cfg.lambda_grid.empty()) throw ConfigError("lambda_grid", "must be nonempty");
  if (cfg.methods.empty()) throw ConfigError("methods", "must be nonempty");
  if (!(cfg.ridge_f >= 0.0)) throw ConfigError("ridge_f", "must be nonnegative");
  if (!(cfg.ridge_b >= 0.0)) throw ConfigError("ridge_b", "must be nonnegative");
  return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(to_string(m));
  json dims = json::array();
  for (const auto& [df, db] : cfg.bounded.dims) dims.push_back({df, db});
  const auto& lin = cfg.linear;
  const auto& pm = cfg.pointmass;
  return {
      {"schema_version", kSchemaVersion},
      {"experiment", to_string(cfg.experiment)},
      {"n_source", cfg.n_source},
      {"n_target", cfg.n_target},
      {"n_test", cfg.n_test},
      {"trials", cfg.trials},
      {"noise_sd", cfg.noise_sd},
      {"lambda_grid", cfg.lambda_grid},
      {"methods", methods},
      {"seed", cfg.seed},
      {"ridge_f", cfg.ridge_f},
      {"ridge_b", cfg.ridge_b},
      {"linear",
       {{"target", density_to_json(lin.target)},
        {"source_endpoint", density_to_json(lin.source_endpoint)},
        {"levels", lin.levels},
        {"f_degree", lin.f_degree},
        {"rbf_count", lin.rbf_count},
        {"rbf_bandwidth", lin.rbf_bandwidth},
        {"truth",
         {{"legendre_coeffs", lin.truth.legendre_coeffs},
          {"bump_amplitude", lin.truth.bump_amplitude},
          {"bump_center", lin.truth.bump_center},
          {"bump_width", lin.truth.bump_width},
          {"bump_frequency", lin.truth.bump_frequency}}},
        {"sensitivity_level", lin.sensitivity_level},
        {"kernel_rulsif_lambdas", lin.kernel_rulsif_lambdas}}},
      {"pointmass",
       {{"n_grid", pm.n_grid},
        {"L_grid", pm.L_grid},
        {"smoothness", pm.smoothness},
        {"series_terms", pm.series_terms},
        {"b_multipliers", pm.b_multipliers},
        {"b_dim_cap", pm.b_dim_cap},
        {"target_ratio", pm.target_ratio},
        {"erm_dim_rule", pm.erm_dim_rule == ErmDimRule::Nominal ? "nominal" : "effective"},
        {"quad_points", pm.quad_points}}},
      {"bounded",
       {{"kappa", cfg.bounded.kappa},
        {"dims", dims},
        {"truth_coeffs", cfg.bounded.truth_coeffs},
        {"quad_points", cfg.bounded.quad_points}}},
  };
}

nlohmann::json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(assignment, "override must look like key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty path component");
    if (!node->is_object()) {
      throw ConfigError(key.substr(0, start == 0 ? 0 : start - 1), "cannot descend into a non-object");
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

}  // namespace tilt::app
