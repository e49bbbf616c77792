#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tilt/app/commands.hpp"
#include "tilt/app/config.hpp"
#include "tilt/app/io.hpp"
#include "tilt/errors.hpp"

using namespace tilt;
using namespace tilt::app;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tilt_test_app_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const json& doc) {
  const fs::path path = dir / "config.json";
  std::ofstream(path) << doc.dump(2);
  return path;
}

json linear_doc() {
  return {{"schema_version", 1},
          {"experiment", "linear_shift_sweep"},
          {"trials", 1},
          {"n_test", 1000},
          {"linear", {{"levels", {0.0, 0.5, 1.0}}}}};
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  return json::parse(in);
}

std::string field_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("config parsing fills defaults and round-trips") {
  const ExperimentConfig cfg = config_from_json(linear_doc());
  CHECK(cfg.trials == 1);
  CHECK(cfg.n_source == 320);
  CHECK(cfg.linear.levels.size() == 3);
  CHECK(cfg.lambda_grid.size() == 21);
  const ExperimentConfig back = config_from_json(config_to_json(cfg));
  CHECK(config_to_json(back) == config_to_json(cfg));

  json grid = linear_doc();
  grid["lambda_grid"] = {{"log10_min", -2}, {"log10_max", 2}, {"count", 5}};
  const ExperimentConfig g = config_from_json(grid);
  REQUIRE(g.lambda_grid.size() == 5);
  CHECK(g.lambda_grid.front() == 1e-2);
  CHECK(g.lambda_grid[2] == doctest::Approx(1.0));
  CHECK(g.lambda_grid.back() == 1e2);

  for (const char* kind :
       {"linear_shift_sweep", "lambda_sensitivity", "pointmass_rate", "bounded_ratio_sweep"}) {
    const ExperimentConfig d = ExperimentConfig::defaults(parse_experiment_kind(kind));
    CHECK(config_to_json(config_from_json(config_to_json(d))) == config_to_json(d));
  }
}

TEST_CASE("schema violations name the field") {
  json doc = linear_doc();
  doc["bogus"] = 1;
  CHECK(field_of([&] { config_from_json(doc); }) == "bogus");
  doc = linear_doc();
  doc["trials"] = "many";
  CHECK(field_of([&] { config_from_json(doc); }) == "trials");
  doc = linear_doc();
  doc["schema_version"] = 2;
  CHECK(field_of([&] { config_from_json(doc); }) == "schema_version");
  doc = linear_doc();
  doc["linear"]["target"] = {{"kind", "beta"}, {"a", 2}};
  CHECK(field_of([&] { config_from_json(doc); }).rfind("linear.target", 0) == 0);
  doc = linear_doc();
  doc["methods"] = {"SourceERM", "Magic"};
  CHECK(field_of([&] { config_from_json(doc); }).rfind("methods", 0) == 0);
  doc = linear_doc();
  doc.erase("experiment");
  CHECK(field_of([&] { config_from_json(doc); }) == "experiment");
}

TEST_CASE("density records round-trip") {
  for (const auto& d :
       {DensityModel::beta(2, 5), DensityModel::uniform(), DensityModel::tilted_cosine(1.5),
        DensityModel::atom_mixture(0.0, 0.75, DensityModel::beta(3, 3))}) {
    CHECK(density_from_json(density_to_json(d), "d") == d);
  }
  CHECK_THROWS_AS(density_from_json({{"kind", "gamma"}}, "d"), ConfigError);
}

TEST_CASE("overrides") {
  json doc = linear_doc();
  apply_override(doc, "trials=5");
  CHECK(doc["trials"] == 5);
  apply_override(doc, "linear.truth.bump_amplitude=0.25");
  CHECK(doc["linear"]["truth"]["bump_amplitude"] == 0.25);
  apply_override(doc, "linear.levels=[0,1]");
  CHECK(doc["linear"]["levels"].size() == 2);
  apply_override(doc, "experiment=lambda_sensitivity");
  CHECK(doc["experiment"] == "lambda_sensitivity");
  CHECK_THROWS_AS(apply_override(doc, "novalue"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "=3"), ConfigError);
}

TEST_CASE("CSV formatting and reading") {
  CHECK(format_real(0.1) == "0.10000000000000001");
  CHECK(format_real(NAN) == "nan");
  CHECK(format_real(2.0) == "2");
  CHECK(parse_real("nan") != parse_real("nan"));
  CHECK(parse_real("0.10000000000000001") == 0.1);
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");

  const fs::path dir = scratch("csv");
  write_text_file(dir / "t.csv", "a,b\n1,\"x,y\"\n2,\"q\"\"\"\n");
  const CsvTable t = read_csv(dir / "t.csv");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][t.column("b")] == "x,y");
  CHECK(t.rows[1][t.column("b")] == "q\"");
  CHECK_THROWS_AS(t.column("c"), DataError);
}

TEST_CASE("run writes the documented files") {
  const fs::path dir = scratch("run");
  const fs::path cfg = write_config(dir, linear_doc());
  std::ostringstream out, err;
  RunRequest req;
  req.config_path = cfg.string();
  req.out_dir = (dir / "a").string();
  req.threads = 1;
  REQUIRE(cmd_run(req, out, err) == kExitOk);
  const json status = json::parse(out.str());
  CHECK(status["status"] == "ok");

  const CsvTable trials = read_csv(dir / "a" / "trials.csv");
  CHECK(trials.header == std::vector<std::string>{"experiment", "method", "level_or_L", "n", "m",
                                                  "lambda", "d_f", "d_b", "target_mse", "seed",
                                                  "trial", "status"});
  const CsvTable agg = read_csv(dir / "a" / "aggregates.csv");
  std::map<std::string, int> per_method;
  for (const auto& row : agg.rows) ++per_method[row[agg.column("method")]];
  CHECK(per_method.size() == 4);
  for (const auto& [method, rows] : per_method) CHECK(rows == 3);

  const json manifest = read_json(dir / "a" / "manifest.json");
  for (const auto& [name, sum] : manifest["files"].items()) {
    CHECK(sha256_file(dir / "a" / name) == sum.get<std::string>());
  }
  CHECK(manifest["resolved_config"]["trials"] == 1);
  CHECK(manifest.contains("started_at"));
  CHECK(manifest["tool_version"] == kToolVersion);

  // Same config again, different thread count: identical data files.
  req.out_dir = (dir / "b").string();
  req.threads = 3;
  REQUIRE(cmd_run(req, out, err) == kExitOk);
  const json again = read_json(dir / "b" / "manifest.json");
  CHECK(again["files"] == manifest["files"]);

  // CLI-style overrides win and land in the snapshot.
  req.out_dir = (dir / "c").string();
  req.overrides = {"trials=5"};
  REQUIRE(cmd_run(req, out, err) == kExitOk);
  CHECK(read_json(dir / "c" / "manifest.json")["resolved_config"]["trials"] == 5);
  req.trials = 2;
  REQUIRE(cmd_run(req, out, err) == kExitOk);
  CHECK(read_json(dir / "c" / "manifest.json")["resolved_config"]["trials"] == 2);
}

TEST_CASE("run error records and exit codes") {
  const fs::path dir = scratch("errors");
  json doc = linear_doc();
  doc["linear"]["levels"] = {0.0, 2.0};
  RunRequest req;
  req.config_path = write_config(dir, doc).string();
  req.out_dir = (dir / "out").string();
  std::ostringstream out, err;
  CHECK(cmd_run(req, out, err) == kExitConfig);
  const json rec = json::parse(err.str());
  CHECK(rec["status"] == "error");
  CHECK(rec["field"].get<std::string>().rfind("linear.levels", 0) == 0);

  req.config_path = (dir / "missing.json").string();
  CHECK(cmd_run(req, out, err) == kExitConfig);

  // Rank-deficient fits with no ridge fail in every cell.
  doc = linear_doc();
  doc["n_source"] = 2;
  doc["ridge_f"] = 0.0;
  doc["ridge_b"] = 0.0;
  doc["methods"] = {"SourceERM"};
  req.config_path = write_config(dir, doc).string();
  std::ostringstream err3;
  CHECK(cmd_run(req, out, err3) == kExitSolverFailures);
  const CsvTable trials = read_csv(dir / "out" / "trials.csv");
  for (const auto& row : trials.rows) CHECK(row[trials.column("status")] != "ok");
}

TEST_CASE("verify reports") {
  std::ostringstream out, err;
  VerifyRequest req{"decomposition", 1e-8, 5, 1};
  CHECK(cmd_verify(req, out, err) == kExitOk);
  const json ok = json::parse(out.str());
  CHECK(ok["pass"] == true);
  CHECK(ok["cases"] == 5);

  std::ostringstream out0;
  req.tol = 0.0;
  CHECK(cmd_verify(req, out0, err) == kExitFailure);
  const json fail = json::parse(out0.str());
  CHECK(fail["pass"] == false);
  CHECK(fail["worst_case"].contains("instance"));

  std::ostringstream out1;
  CHECK(cmd_verify({"bregman", 1e-10, 20, 3}, out1, err) == kExitOk);
  std::ostringstream bad;
  CHECK(cmd_verify({"nonsense", 1e-8, 5, 1}, bad, err) == kExitConfig);
}

TEST_CASE("figure data") {
  const fs::path dir = scratch("figures");
  std::ostringstream out, err;
  FigureRequest fig{"fig1_weights", (dir / "fig").string(), std::nullopt};
  REQUIRE(cmd_figure_data(fig, out, err) == kExitOk);
  const CsvTable w = read_csv(dir / "fig" / "fig1_weights.csv");
  CHECK(w.header == std::vector<std::string>{"x", "v_lambda", "w_lambda", "bstar_linear",
                                             "bstar_quad", "bstar_deg6"});
  CHECK(w.rows.size() == 1001);
  for (const auto& row : w.rows) {
    const double v = parse_real(row[1]);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  fig.figure = "fig2c_placeholder";
  REQUIRE(cmd_figure_data(fig, out, err) == kExitOk);
  CHECK(read_csv(dir / "fig" / "fig2c_placeholder.csv").rows.empty());
  CHECK(read_json(dir / "fig" / "fig2c_placeholder.json")["status"] == "out_of_scope");

  fig.figure = "fig3";
  fig.input_dir = (dir / "nowhere").string();
  std::ostringstream missing;
  CHECK(cmd_figure_data(fig, out, missing) == kExitMissingInputs);
  CHECK(missing.str().find("tilt run") != std::string::npos);

  // A small point-mass run feeds fig3.
  json doc = {{"schema_version", 1}, {"experiment", "pointmass_rate"}, {"trials", 2},
              {"pointmass", {{"n_grid", {128, 256, 512}}, {"L_grid", {1, 2}},
                             {"quad_points", 2001}}}};
  RunRequest req;
  req.config_path = write_config(dir, doc).string();
  req.out_dir = (dir / "pm").string();
  REQUIRE(cmd_run(req, out, err) == kExitOk);
  fig.input_dir = req.out_dir;
  REQUIRE(cmd_figure_data(fig, out, err) == kExitOk);
  const CsvTable f3 = read_csv(dir / "fig" / "fig3.csv");
  CHECK(f3.header == std::vector<std::string>{"n_over_L", "method", "n", "L", "mean_mse"});
  std::size_t ref = 0;
  for (const auto& row : f3.rows) ref += row[1] == "reference_slope";
  CHECK(ref > 0);

  // A run directory of the wrong experiment is rejected.
  fig.figure = "fig2a";
  CHECK(cmd_figure_data(fig, out, err) == kExitMissingInputs);
}
