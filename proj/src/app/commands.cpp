#include "tilt/app/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "tilt/app/config.hpp"
#include "tilt/app/io.hpp"
#include "tilt/app/verify.hpp"
#include "tilt/errors.hpp"
#include "tilt/experiments.hpp"
#include "tilt/population.hpp"

namespace tilt::app {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void emit_error(std::ostream& err, int code, const std::string& kind, const std::string& message,
                const std::string& field = "") {
  json rec = {{"status", "error"}, {"exit_code", code}, {"error", kind}, {"message", message}};
  if (!field.empty()) rec["field"] = field;
  err << rec.dump() << '\n';
}

std::string selection_note(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::LinearShiftSweep:
      return "TILT and ExactRuLSIF pick lambda from lambda_grid by oracle MSE on the target test "
             "draw; KernelRuLSIF picks from linear.kernel_rulsif_lambdas the same way";
    case ExperimentKind::LambdaSensitivity:
      return "no selection: one TILT row per lambda_grid value, SourceERM reference rows have "
             "lambda = nan";
    case ExperimentKind::PointMassRate:
      return "TILT picks (B dimension, lambda) by oracle quadrature MSE against the truncated "
             "series truth";
    case ExperimentKind::BoundedRatioSweep:
      return "no selection: one TILT row per (d_f, d_b, lambda), SourceERM rows per d_f with "
             "lambda = nan";
  }
  return "";
}

std::string csv_of(const auto& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

/// Largest failed fraction over (series, key) cells.
double worst_failure_rate(const SweepResult& sweep) {
  std::map<std::pair<std::string, std::string>, std::pair<std::size_t, std::size_t>> cells;
  for (const auto& r : sweep.trials) {
    auto& c = cells[{r.series, format_real(r.key)}];
    ++c.second;
    if (r.status != "ok") ++c.first;
  }
  double worst = 0.0;
  for (const auto& [key, c] : cells) {
    worst = std::max(worst, static_cast<double>(c.first) / static_cast<double>(c.second));
  }
  return worst;
}

json rate_report_json(const RateReport& rep) {
  json cells = json::array();
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json(nullptr); };
  for (const auto& c : rep.cells) {
    cells.push_back({{"n", c.n},
                     {"L", c.L},
                     {"n_over_L", c.n_over_L},
                     {"d_f", c.d_f},
                     {"d_erm", c.d_erm},
                     {"tilt_mean", num(c.tilt.mean)},
                     {"tilt_se", num(c.tilt.se)},
                     {"tilt_ok", c.tilt.ok},
                     {"erm_mean", num(c.erm.mean)},
                     {"erm_se", num(c.erm.se)},
                     {"erm_ok", c.erm.ok}});
  }
  auto fit = [&](const LogLogFit& f) {
    return json{{"slope", num(f.slope)}, {"intercept", num(f.intercept)}, {"r2", num(f.r2)}};
  };
  return {{"cells", cells},
          {"tilt_fit", fit(rep.tilt_fit)},
          {"erm_fit", fit(rep.erm_fit)},
          {"reference_slope", -0.8},
          {"warnings", rep.warnings}};
}

}  // namespace

std::string default_output_root() {
  const char* env = std::getenv("TILT_OUT_DIR");
  return env && *env ? std::string(env) : std::string("results");
}

int resolve_threads(std::optional<int> requested) {
  int n = requested.value_or(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  if (const char* cap = std::getenv("TILT_MAX_THREADS"); cap && *cap) {
    const int c = std::atoi(cap);
    if (c >= 1) n = std::min(n, c);
  }
  return std::max(1, n);
}

int cmd_run(const RunRequest& req, std::ostream& out, std::ostream& err) {
  const std::string started = utc_timestamp();
  ExperimentConfig cfg;
  json resolved;
  try {
    json doc = read_config_file(req.config_path);
    for (const auto& o : req.overrides) apply_override(doc, o);
    if (req.seed) doc["seed"] = *req.seed;
    if (req.trials) doc["trials"] = *req.trials;
    cfg = config_from_json(doc);
    resolved = config_to_json(cfg);
  } catch (const ConfigError& e) {
    emit_error(err, kExitConfig, "config", e.what(), e.field());
    return kExitConfig;
  } catch (const Error& e) {
    emit_error(err, kExitConfig, "config", e.what());
    return kExitConfig;
  }
  if (req.threads && *req.threads < 1) {
    emit_error(err, kExitConfig, "config", "threads: must be at least 1", "threads");
    return kExitConfig;
  }
  const int threads = resolve_threads(req.threads);
  const fs::path dir =
      req.out_dir ? fs::path(*req.out_dir) : fs::path(default_output_root()) / to_string(cfg.experiment);

  try {
    fs::create_directories(dir);
    std::map<std::string, std::string> files;
    SweepResult sweep;
    double level_or_L = kNotApplicable;
    switch (cfg.experiment) {
      case ExperimentKind::LinearShiftSweep:
        sweep = run_linear_shift_sweep(cfg, threads);
        break;
      case ExperimentKind::LambdaSensitivity:
        sweep = run_lambda_sensitivity(cfg, threads);
        level_or_L = cfg.linear.sensitivity_level;
        break;
      case ExperimentKind::PointMassRate: {
        const RateReport rep = run_pointmass_rate(cfg, threads);
        sweep = rep.sweep;
        files["rate_report.json"] = rate_report_json(rep).dump(2) + "\n";
        break;
      }
      case ExperimentKind::BoundedRatioSweep: {
        const BoundedRatioResult res = run_bounded_ratio_sweep(cfg, threads);
        sweep = res.sweep;
        level_or_L = cfg.bounded.kappa;
        files["err_lambda.csv"] =
            csv_of([&](std::ostream& os) { write_err_lambda_csv(os, res.err_lambda); });
        break;
      }
    }
    files["trials.csv"] = csv_of([&](std::ostream& os) { write_trials_csv(os, sweep.trials); });
    files["aggregates.csv"] = csv_of(
        [&](std::ostream& os) { write_aggregates_csv(os, sweep, cfg.experiment, level_or_L); });

    json checksums = json::object();
    for (const auto& [name, text] : files) {
      write_text_file(dir / name, text);
      checksums[name] = sha256_file(dir / name);
    }
    const double failure_rate = worst_failure_rate(sweep);
    const json manifest = {{"tool", "tilt"},
                           {"tool_version", kToolVersion},
                           {"config_path", req.config_path},
                           {"overrides", req.overrides},
                           {"resolved_config", resolved},
                           {"seed", cfg.seed},
                           {"threads", threads},
                           {"started_at", started},
                           {"finished_at", utc_timestamp()},
                           {"out_dir", dir.string()},
                           {"selection", selection_note(cfg.experiment)},
                           {"worst_cell_failure_rate", failure_rate},
                           {"files", checksums}};
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

    if (failure_rate > 0.5) {
      emit_error(err, kExitSolverFailures, "solver_failures",
                 "more than half of the trials failed in at least one cell");
      return kExitSolverFailures;
    }
    out << json{{"status", "ok"}, {"out_dir", dir.string()}, {"rows", sweep.trials.size()}}.dump()
        << '\n';
    return kExitOk;
  } catch (const ConfigError& e) {
    emit_error(err, kExitConfig, "config", e.what(), e.field());
    return kExitConfig;
  } catch (const std::exception& e) {
    emit_error(err, kExitFailure, "internal", e.what());
    return kExitFailure;
  }
}

int cmd_verify(const VerifyRequest& req, std::ostream& out, std::ostream& err) {
  if (!(req.tol > 0.0)) {
    // A zero tolerance cannot be met in floating point; run anyway so the
    // worst case is reported.
    if (!(req.tol == 0.0)) {
      emit_error(err, kExitConfig, "config", "tol: must be nonnegative", "tol");
      return kExitConfig;
    }
  }
  try {
    const VerifyOutcome res = run_verify_suite(req.kind, req.cases, req.seed, req.tol);
    json rec = {{"kind", res.kind},
                {"max_rel_gap", res.max_rel_gap},
                {"cases", res.cases},
                {"tol", res.tol},
                {"pass", res.pass}};
    if (!res.pass) rec["worst_case"] = res.worst_case;
    out << rec.dump() << '\n';
    return res.pass ? kExitOk : kExitFailure;
  } catch (const ConfigError& e) {
    emit_error(err, kExitConfig, "config", e.what(), e.field());
    return kExitConfig;
  } catch (const std::exception& e) {
    emit_error(err, kExitFailure, "internal", e.what());
    return kExitFailure;
  }
}

namespace {

struct MissingInputs : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Grouped statistics over status=ok target_mse values.
struct Stats {
  double mean = kNotApplicable;
  double q25 = kNotApplicable;
  double q75 = kNotApplicable;
  std::size_t count = 0;
};

Stats stats_of(const std::vector<double>& values, std::size_t count) {
  Stats s;
  s.count = count;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.q25 = quantile(values, 0.25);
  s.q75 = quantile(values, 0.75);
  return s;
}

/// Trial rows grouped by a key tuple, in first-appearance order.
template <class Key>
struct Groups {
  std::vector<Key> order;
  std::map<Key, std::pair<std::vector<double>, std::size_t>> cells;

  void add(const Key& key, bool ok, double value) {
    auto [it, inserted] = cells.try_emplace(key);
    if (inserted) order.push_back(key);
    ++it->second.second;
    if (ok) it->second.first.push_back(value);
  }
  Stats at(const Key& key) const {
    const auto it = cells.find(key);
    if (it == cells.end()) return {};
    return stats_of(it->second.first, it->second.second);
  }
};

fs::path require_run(const std::optional<std::string>& input, ExperimentKind kind,
                     const std::string& figure) {
  const fs::path dir = input ? fs::path(*input) : fs::path(default_output_root()) / to_string(kind);
  const std::string hint = "run `tilt run --config <" + to_string(kind) + " config> --out " +
                           dir.string() + "` before `tilt figure-data --figure " + figure + "`";
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest) || !fs::exists(dir / "trials.csv")) {
    throw MissingInputs("missing " + to_string(kind) + " outputs in " + dir.string() + "; " + hint);
  }
  std::ifstream in(manifest);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error&) {
    throw MissingInputs("unreadable manifest in " + dir.string() + "; " + hint);
  }
  const auto exp = m.value("/resolved_config/experiment"_json_pointer, std::string());
  if (exp != to_string(kind)) {
    throw MissingInputs(dir.string() + " holds " + (exp.empty() ? "unknown" : exp) +
                        " outputs, not " + to_string(kind) + "; " + hint);
  }
  return dir;
}

std::string fig1_weights() {
  // Source near the shifted endpoint, target at the fixed endpoint.
  const PopulationContext ctx(DensityModel::beta(5.0, 2.0), DensityModel::beta(2.0, 5.0), 0.1);
  const TargetFunction fstar = LinearTruth{}.to_function();
  const Quadrature quad = Quadrature::gauss_legendre(512);
  std::vector<RealFunction> fits;
  for (int degree : {1, 2, 6}) {
    const FeatureMap map = FeatureMap::shifted_legendre(degree);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(map.output_dim());
    for (std::size_t i = 0; i < quad.size(); ++i) {
      c += quad.weights[i] * fstar(quad.nodes[i]) * map.featurize(quad.nodes[i]);
    }
    fits.push_back([map, c](double x) { return evaluate_expansion(map, c, x); });
  }
  std::ostringstream os;
  os << "x,v_lambda,w_lambda,bstar_linear,bstar_quad,bstar_deg6\n";
  constexpr int kPoints = 1001;
  for (int i = 0; i < kPoints; ++i) {
    // Cell midpoints: both Beta densities vanish at the endpoints.
    const double x = (i + 0.5) / kPoints;
    os << format_real(x) << ',' << format_real(v_weight(ctx, x)) << ','
       << format_real(w_weight(ctx, x));
    for (const auto& f : fits) os << ',' << format_real(optimal_offset(ctx, f, fstar, x));
    os << '\n';
  }
  return os.str();
}

struct TrialView {
  CsvTable table;
  std::size_t method, level, lambda, d_f, d_b, mse, status;

  explicit TrialView(const fs::path& path)
      : table(read_csv(path)),
        method(table.column("method")),
        level(table.column("level_or_L")),
        lambda(table.column("lambda")),
        d_f(table.column("d_f")),
        d_b(table.column("d_b")),
        mse(table.column("target_mse")),
        status(table.column("status")) {}
};

std::string fig2a(const fs::path& dir) {
  const TrialView t(dir / "trials.csv");
  Groups<std::pair<std::string, double>> g;
  for (const auto& r : t.table.rows) {
    g.add({r[t.method], parse_real(r[t.level])}, r[t.status] == "ok", parse_real(r[t.mse]));
  }
  std::ostringstream os;
  os << "level,method,mean,q25,q75,count\n";
  for (const auto& key : g.order) {
    const Stats s = g.at(key);
    os << format_real(key.second) << ',' << csv_field(key.first) << ',' << format_real(s.mean)
       << ',' << format_real(s.q25) << ',' << format_real(s.q75) << ',' << s.count << '\n';
  }
  return os.str();
}

std::string fig2b(const fs::path& dir) {
  const TrialView t(dir / "trials.csv");
  Groups<std::pair<std::string, std::string>> g;
  std::vector<std::string> lambdas;
  for (const auto& r : t.table.rows) {
    const std::string lam = r[t.lambda];
    if (r[t.method] == "TILT" && std::find(lambdas.begin(), lambdas.end(), lam) == lambdas.end()) {
      lambdas.push_back(lam);
    }
    g.add({r[t.method], r[t.method] == "TILT" ? lam : "nan"}, r[t.status] == "ok",
          parse_real(r[t.mse]));
  }
  std::ostringstream os;
  os << "lambda,method,mean,q25,q75,count\n";
  std::vector<std::string> methods;
  for (const auto& key : g.order) {
    if (std::find(methods.begin(), methods.end(), key.first) == methods.end()) {
      methods.push_back(key.first);
    }
  }
  for (const auto& m : methods) {
    for (const auto& lam : lambdas) {
      // Reference methods carry no lambda; their statistics repeat along the grid.
      const Stats s = g.at({m, m == "TILT" ? lam : "nan"});
      os << format_real(parse_real(lam)) << ',' << csv_field(m) << ',' << format_real(s.mean)
         << ',' << format_real(s.q25) << ',' << format_real(s.q75) << ',' << s.count << '\n';
    }
  }
  return os.str();
}

std::pair<std::string, std::string> fig3(const fs::path& dir) {
  const fs::path path = dir / "rate_report.json";
  if (!fs::exists(path)) throw MissingInputs("missing " + path.string());
  std::ifstream in(path);
  const json rep = json::parse(in);
  std::ostringstream os;
  os << "n_over_L,method,n,L,mean_mse\n";
  std::vector<double> xs;
  double anchor = 0.0;
  std::size_t anchored = 0;
  for (const auto& c : rep["cells"]) {
    const double x = c["n_over_L"].get<double>();
    for (const auto& [method, key] : {std::pair{"TILT", "tilt_mean"}, {"SourceERM", "erm_mean"}}) {
      if (c[key].is_null()) continue;
      const double y = c[key].get<double>();
      os << format_real(x) << ',' << method << ',' << c["n"].get<int>() << ','
         << c["L"].get<int>() << ',' << format_real(y) << '\n';
      if (std::string(method) == "TILT" && y > 0.0) {
        anchor += std::log(y) + 0.8 * std::log(x);
        ++anchored;
      }
    }
    if (std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
  }
  std::sort(xs.begin(), xs.end());
  if (anchored > 0) {
    // Reference line of slope -4/5 through the geometric centre of the TILT means.
    const double log_c = anchor / static_cast<double>(anchored);
    for (double x : xs) {
      os << format_real(x) << ",reference_slope,nan,nan,"
         << format_real(std::exp(log_c - 0.8 * std::log(x))) << '\n';
    }
  }
  std::ostringstream fits;
  fits << "method,slope,intercept,r2\n";
  auto num = [](const json& v) { return v.is_null() ? kNotApplicable : v.get<double>(); };
  for (const auto& [method, key] : {std::pair{"TILT", "tilt_fit"}, {"SourceERM", "erm_fit"}}) {
    const json& f = rep[key];
    fits << method << ',' << format_real(num(f["slope"])) << ','
         << format_real(num(f["intercept"])) << ',' << format_real(num(f["r2"])) << '\n';
  }
  fits << "reference,-0.80000000000000004,nan,nan\n";
  return {os.str(), fits.str()};
}

std::string appendix_e(const fs::path& dir) {
  const fs::path err_path = dir / "err_lambda.csv";
  if (!fs::exists(err_path)) throw MissingInputs("missing " + err_path.string());
  const TrialView t(dir / "trials.csv");
  using Key = std::tuple<std::string, int, int, std::string>;
  Groups<Key> g;
  std::vector<std::tuple<int, int>> pairs;
  std::vector<std::string> lambdas;
  for (const auto& r : t.table.rows) {
    const int df = std::stoi(r[t.d_f]);
    const int db = std::stoi(r[t.d_b]);
    const bool tilt = r[t.method] == "TILT";
    if (tilt) {
      if (std::find(pairs.begin(), pairs.end(), std::tuple{df, db}) == pairs.end()) {
        pairs.emplace_back(df, db);
      }
      if (std::find(lambdas.begin(), lambdas.end(), r[t.lambda]) == lambdas.end()) {
        lambdas.push_back(r[t.lambda]);
      }
    }
    g.add({r[t.method], df, tilt ? db : 0, tilt ? r[t.lambda] : "nan"}, r[t.status] == "ok",
          parse_real(r[t.mse]));
  }
  const CsvTable e = read_csv(err_path);
  const std::size_t e_df = e.column("d_f"), e_db = e.column("d_b"), e_lam = e.column("lambda"),
                    e_val = e.column("scaled_err_lambda_sq");
  std::map<std::tuple<int, int, std::string>, std::pair<double, std::size_t>> err;
  for (const auto& r : e.rows) {
    auto& acc = err[{std::stoi(r[e_df]), std::stoi(r[e_db]), r[e_lam]}];
    acc.first += parse_real(r[e_val]);
    ++acc.second;
  }
  std::ostringstream os;
  os << "d_f,d_b,lambda,method,mean_mse,q25,q75,count,mean_scaled_err_lambda_sq\n";
  for (const auto& [df, db] : pairs) {
    for (const auto& lam : lambdas) {
      const Stats s = g.at({"TILT", df, db, lam});
      const auto it = err.find({df, db, lam});
      const double e_mean = it == err.end() || it->second.second == 0
                                ? kNotApplicable
                                : it->second.first / static_cast<double>(it->second.second);
      os << df << ',' << db << ',' << format_real(parse_real(lam)) << ",TILT,"
         << format_real(s.mean) << ',' << format_real(s.q25) << ',' << format_real(s.q75) << ','
         << s.count << ',' << format_real(e_mean) << '\n';
    }
    for (const auto& lam : lambdas) {
      const Stats s = g.at({"SourceERM", df, 0, "nan"});
      if (s.count == 0) continue;
      os << df << ',' << db << ',' << format_real(parse_real(lam)) << ",SourceERM,"
         << format_real(s.mean) << ',' << format_real(s.q25) << ',' << format_real(s.q75) << ','
         << s.count << ",nan\n";
    }
  }
  return os.str();
}

}  // namespace

int cmd_figure_data(const FigureRequest& req, std::ostream& out, std::ostream& err) {
  const fs::path dir = req.out_dir ? fs::path(*req.out_dir) : fs::path(default_output_root()) / "figures";
  try {
    std::map<std::string, std::string> files;
    std::string status = "ok";
    if (req.figure == "fig1_weights") {
      files["fig1_weights.csv"] = fig1_weights();
    } else if (req.figure == "fig2a") {
      files["fig2a.csv"] =
          fig2a(require_run(req.input_dir, ExperimentKind::LinearShiftSweep, req.figure));
    } else if (req.figure == "fig2b") {
      files["fig2b.csv"] =
          fig2b(require_run(req.input_dir, ExperimentKind::LambdaSensitivity, req.figure));
    } else if (req.figure == "fig2c_placeholder") {
      status = "out_of_scope";
      files["fig2c_placeholder.csv"] = "level,method,mean,q25,q75,count\n";
      files["fig2c_placeholder.json"] =
          json{{"figure", "fig2c_placeholder"},
               {"status", status},
               {"reason", "the high-dimensional neural experiment is not implemented"}}
              .dump(2) +
          "\n";
    } else if (req.figure == "fig3") {
      const auto [data, fits] =
          fig3(require_run(req.input_dir, ExperimentKind::PointMassRate, req.figure));
      files["fig3.csv"] = data;
      files["fig3_fits.csv"] = fits;
    } else if (req.figure == "appendixE") {
      files["appendixE.csv"] =
          appendix_e(require_run(req.input_dir, ExperimentKind::BoundedRatioSweep, req.figure));
    } else {
      emit_error(err, kExitConfig, "config",
                 "figure: expected fig1_weights, fig2a, fig2b, fig2c_placeholder, fig3 or appendixE",
                 "figure");
      return kExitConfig;
    }
    fs::create_directories(dir);
    json written = json::object();
    for (const auto& [name, text] : files) {
      write_text_file(dir / name, text);
      written[name] = sha256_file(dir / name);
    }
    out << json{{"figure", req.figure}, {"status", status}, {"out_dir", dir.string()},
                {"files", written}}
               .dump()
        << '\n';
    return kExitOk;
  } catch (const MissingInputs& e) {
    emit_error(err, kExitMissingInputs, "missing_inputs", e.what());
    return kExitMissingInputs;
  } catch (const std::exception& e) {
    emit_error(err, kExitFailure, "internal", e.what());
    return kExitFailure;
  }
}

}  // namespace tilt::app
