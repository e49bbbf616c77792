#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "tilt/errors.hpp"
#include "tilt/experiments.hpp"
#include "tilt/quadrature.hpp"
#include "tilt/rng.hpp"

using namespace tilt;

namespace {

ExperimentConfig small_linear() {
  ExperimentConfig cfg = ExperimentConfig::defaults(ExperimentKind::LinearShiftSweep);
  cfg.trials = 3;
  cfg.n_test = 2000;
  cfg.linear.levels = {0.0, 0.5, 1.0};
  return cfg;
}

bool same_rows(const std::vector<TrialResult>& a, const std::vector<TrialResult>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    const bool mse_eq = (std::isnan(x.target_mse) && std::isnan(y.target_mse)) ||
                        x.target_mse == y.target_mse;
    const bool lam_eq = (std::isnan(x.lambda) && std::isnan(y.lambda)) || x.lambda == y.lambda;
    if (x.method != y.method || x.seed != y.seed || x.trial != y.trial || !mse_eq || !lam_eq ||
        x.d_f != y.d_f || x.d_b != y.d_b || x.status != y.status) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("type-7 quantiles") {
  CHECK(quantile({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({1, 2, 3, 4}, 0.75) == doctest::Approx(3.25));
  CHECK(quantile({5}, 0.25) == 5.0);
  CHECK(std::isnan(quantile({}, 0.5)));
  CHECK(quantile({4, 1, 3, 2}, 0.5) == doctest::Approx(2.5));
}

TEST_CASE("aggregation groups by series and key") {
  std::vector<TrialResult> rows;
  auto row = [](std::string s, double key, double mse, std::string status = "ok") {
    TrialResult r;
    r.experiment = "x";
    r.method = s;
    r.series = s;
    r.key = key;
    r.target_mse = mse;
    r.status = status;
    return r;
  };
  rows.push_back(row("A", 0.0, 1.0));
  rows.push_back(row("B", 0.0, 5.0));
  rows.push_back(row("A", 0.0, 3.0));
  rows.push_back(row("A", 1.0, 2.0));
  rows.push_back(row("A", 1.0, NAN, "failed"));
  rows.push_back(row("C", NAN, 4.0));
  rows.push_back(row("C", NAN, 6.0));
  const auto agg = aggregate(rows);
  REQUIRE(agg.size() == 4);
  CHECK(agg[0].series == "A");
  CHECK(agg[0].mean == doctest::Approx(2.0));
  CHECK(agg[0].count == 2);
  CHECK(agg[1].series == "B");
  CHECK(agg[2].key == 1.0);
  CHECK(agg[2].count == 2);
  CHECK(agg[2].mean == doctest::Approx(2.0));
  CHECK(agg[3].mean == doctest::Approx(5.0));

  SweepResult sweep;
  sweep.trials = rows;
  const CellSummary s = sweep.summary("A", 1.0);
  CHECK(s.ok == 1);
  CHECK(s.count == 2);
  CHECK(sweep.summary("C", NAN).ok == 2);
}

TEST_CASE("log-log slope fits") {
  std::vector<std::pair<double, double>> pts;
  for (double x : {100.0, 200.0, 400.0, 800.0, 1600.0}) pts.emplace_back(x, std::pow(x, -0.8));
  CHECK(fit_loglog_slope(pts).slope == doctest::Approx(-0.8).epsilon(1e-10));
  CHECK(fit_loglog_slope(pts).r2 == doctest::Approx(1.0));
  for (auto& p : pts) p.second = 3.0;
  CHECK(std::abs(fit_loglog_slope(pts).slope) <= 1e-12);

  Rng rng(9);
  std::normal_distribution<double> noise(0.0, 0.2);
  pts.clear();
  for (int i = 0; i < 12; ++i) {
    const double x = 50.0 * (i + 1);
    pts.emplace_back(x, 2.0 * std::pow(x, -0.7) * std::exp(noise(rng)));
  }
  Eigen::MatrixXd a(12, 2);
  Eigen::VectorXd y(12);
  for (int i = 0; i < 12; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = std::log(pts[i].first);
    y(i) = std::log(pts[i].second);
  }
  const Eigen::Vector2d beta = (a.transpose() * a).ldlt().solve(a.transpose() * y);
  const LogLogFit fit = fit_loglog_slope(pts);
  CHECK(std::abs(fit.slope - beta(1)) <= 1e-12);
  CHECK(std::abs(fit.intercept - beta(0)) <= 1e-12);

  const std::vector<std::pair<double, double>> two{{1.0, 1.0}, {2.0, 0.5}};
  CHECK_THROWS_AS(fit_loglog_slope(two), DomainError);
  const std::vector<std::pair<double, double>> neg{{1.0, 1.0}, {2.0, -0.5}, {3.0, 1.0}};
  CHECK_THROWS_AS(fit_loglog_slope(neg), DomainError);
}

TEST_CASE("oracle tuning") {
  const std::vector<TuningCandidate> one{{1.0, 4, 0.3}};
  CHECK(oracle_tune(one) == 0);
  const std::vector<TuningCandidate> ties{{1.0, 8, 0.2}, {0.1, 8, 0.2}, {0.1, 4, 0.2}, {5.0, 2, 0.5}};
  CHECK(oracle_tune(ties) == 2);
  const std::vector<TuningCandidate> with_nan{{1.0, 1, NAN}, {2.0, 1, 0.4}};
  CHECK(oracle_tune(with_nan) == 1);

  Rng rng(10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 0; c < 50; ++c) {
    std::vector<TuningCandidate> cands(1 + c % 9);
    for (auto& t : cands) t = {unit(rng), static_cast<int>(unit(rng) * 5), unit(rng)};
    std::size_t best = 0;
    for (std::size_t i = 1; i < cands.size(); ++i) {
      if (cands[i].target_mse < cands[best].target_mse) best = i;
    }
    CHECK(oracle_tune(cands) == best);
  }

  const TargetFunction truth = sine_series_truth(2.0, 50);
  const Quadrature quad = Quadrature::trapezoid(4001);
  const std::vector<Predictor> preds{{[](double) { return 0.0; }, 1.0, 1},
                                     {truth.eval, 2.0, 1},
                                     {[&](double x) { return 0.9 * truth(x); }, 0.5, 1}};
  CHECK(oracle_tune(preds, truth, DensityModel::uniform(), quad) == 1);
  CHECK(target_mse(truth.eval, truth, DensityModel::uniform(), quad) == 0.0);
}

TEST_CASE("rate dimension and series truth") {
  CHECK(rate_dimension(512.0, 2.0) == 3);
  CHECK(rate_dimension(8192.0, 2.0) == 6);
  CHECK(rate_dimension(1.0, 2.0) == 1);
  CHECK(rate_dimension(0.5, 2.0) == 1);
  const TargetFunction f = sine_series_truth(2.0, 200);
  CHECK(f(0.0) == doctest::Approx(0.0));
  double direct = 0.0;
  for (int k = 1; k <= 200; ++k) {
    direct += (k % 2 ? 1.0 : -1.0) * std::pow(k, -2.5) * std::sqrt(2.0) * std::sin(M_PI * k * 0.3);
  }
  CHECK(f(0.3) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("stream seeds depend only on their own indices") {
  CHECK(stream_seed(1, 0, 0) != stream_seed(1, 0, 1));
  CHECK(stream_seed(1, 0, 1) != stream_seed(1, 1, 0));
  CHECK(stream_seed(1, 2, 3) == stream_seed(1, 2, 3));
  ExperimentConfig cfg = small_linear();
  const SweepResult a = run_linear_shift_sweep(cfg, 1);
  cfg.trials = 5;
  const SweepResult b = run_linear_shift_sweep(cfg, 1);
  std::map<std::tuple<std::string, double, std::size_t>, double> first;
  for (const auto& r : a.trials) first[{r.method, r.level_or_L, r.trial}] = r.target_mse;
  std::size_t matched = 0;
  for (const auto& r : b.trials) {
    const auto it = first.find({r.method, r.level_or_L, r.trial});
    if (it == first.end()) continue;
    CHECK(it->second == r.target_mse);
    ++matched;
  }
  CHECK(matched == a.trials.size());
}

TEST_CASE("every cell holds the configured trial count") {
  const ExperimentConfig cfg = small_linear();
  const SweepResult sweep = run_linear_shift_sweep(cfg, 1);
  CHECK(sweep.trials.size() == cfg.trials * cfg.linear.levels.size() * cfg.methods.size());
  for (const auto& agg : sweep.aggregates) CHECK(agg.count == cfg.trials);
  CHECK(sweep.aggregates.size() == cfg.linear.levels.size() * cfg.methods.size());
}

TEST_CASE("runs are identical across thread counts") {
  const ExperimentConfig lin = small_linear();
  CHECK(same_rows(run_linear_shift_sweep(lin, 1).trials, run_linear_shift_sweep(lin, 3).trials));

  ExperimentConfig sens = ExperimentConfig::defaults(ExperimentKind::LambdaSensitivity);
  sens.trials = 3;
  sens.n_test = 2000;
  CHECK(same_rows(run_lambda_sensitivity(sens, 1).trials, run_lambda_sensitivity(sens, 4).trials));

  ExperimentConfig pm = ExperimentConfig::defaults(ExperimentKind::PointMassRate);
  pm.trials = 2;
  pm.pointmass.n_grid = {256, 512};
  pm.pointmass.L_grid = {1, 2};
  pm.pointmass.quad_points = 2001;
  CHECK(same_rows(run_pointmass_rate(pm, 1).sweep.trials, run_pointmass_rate(pm, 4).sweep.trials));

  ExperimentConfig br = ExperimentConfig::defaults(ExperimentKind::BoundedRatioSweep);
  br.trials = 3;
  CHECK(same_rows(run_bounded_ratio_sweep(br, 1).sweep.trials,
                  run_bounded_ratio_sweep(br, 2).sweep.trials));
}

TEST_CASE("well-specified control: source ERM attains the parametric rate") {
  ExperimentConfig cfg = ExperimentConfig::defaults(ExperimentKind::LinearShiftSweep);
  cfg.trials = 40;
  cfg.n_test = 4000;
  cfg.methods = {Method::SourceERM};
  cfg.linear.truth.bump_amplitude = 0.0;
  cfg.linear.levels = {0.0, 0.5, 1.0};
  const SweepResult sweep = run_linear_shift_sweep(cfg, 1);

  const FeatureMap fmap = FeatureMap::shifted_legendre(cfg.linear.f_degree);
  const Quadrature quad = Quadrature::gauss_legendre(512);
  const ShiftPath path{cfg.linear.target, cfg.linear.source_endpoint, cfg.linear.levels};
  for (double level : cfg.linear.levels) {
    const DensityModel p = interpolate_source(path, level);
    Eigen::MatrixXd gp = Eigen::MatrixXd::Zero(4, 4), gq = gp;
    for (std::size_t i = 0; i < quad.size(); ++i) {
      const Eigen::VectorXd phi = fmap.featurize(quad.nodes[i]);
      gp += quad.weights[i] * p.pdf(quad.nodes[i]) * phi * phi.transpose();
      gq += quad.weights[i] * cfg.linear.target.pdf(quad.nodes[i]) * phi * phi.transpose();
    }
    const double expected = cfg.noise_sd * cfg.noise_sd / cfg.n_source *
                            gp.ldlt().solve(gq).trace();
    const CellSummary s = sweep.summary("SourceERM", level);
    CAPTURE(level);
    CHECK(s.mean <= 3.0 * expected);
  }
}

TEST_CASE("point-mass matched case and bounded-ratio penalty dominance") {
  ExperimentConfig pm = ExperimentConfig::defaults(ExperimentKind::PointMassRate);
  pm.trials = 10;
  pm.pointmass.n_grid = {1024};
  pm.pointmass.L_grid = {1, 4};
  const RateReport rep = run_pointmass_rate(pm, 1);
  for (const auto& cell : rep.cells) {
    if (cell.L != 1) continue;
    const double se = std::sqrt(cell.tilt.se * cell.tilt.se + cell.erm.se * cell.erm.se);
    CHECK(std::abs(cell.tilt.mean - cell.erm.mean) <= 2.0 * se);
  }

  ExperimentConfig br = ExperimentConfig::defaults(ExperimentKind::BoundedRatioSweep);
  br.trials = 10;
  const BoundedRatioResult res = run_bounded_ratio_sweep(br, 1);
  const double top = br.lambda_grid.back();
  for (const auto& [df, db] : br.bounded.dims) {
    const double tilt = res.sweep.summary(tilt_series(df, db), top).mean;
    const double erm = res.sweep.summary(erm_series(df), kNotApplicable).mean;
    CAPTURE(df);
    CAPTURE(db);
    CHECK(std::abs(tilt / erm - 1.0) <= 0.05);
  }
  CHECK(res.ratio_bounds.max / res.ratio_bounds.min == doctest::Approx(7.8 / 0.13).epsilon(1e-9));
}

TEST_CASE("config validation") {
  ExperimentConfig cfg = small_linear();
  cfg.trials = 0;
  CHECK_THROWS_AS(run_linear_shift_sweep(cfg, 1), ConfigError);
  cfg = small_linear();
  cfg.lambda_grid = {1.0, -1.0};
  CHECK_THROWS_AS(run_linear_shift_sweep(cfg, 1), ConfigError);
}

TEST_CASE("matched-domain sensitivity curve is flat for lambda >= 1") {
  ExperimentConfig cfg = ExperimentConfig::defaults(ExperimentKind::LambdaSensitivity);
  cfg.trials = 20;
  cfg.linear.sensitivity_level = 0.0;
  const SweepResult sweep = run_lambda_sensitivity(cfg, 1);
  const CellSummary erm = sweep.summary("SourceERM", kNotApplicable);
  for (double lam : cfg.lambda_grid) {
    if (lam < 1.0) continue;
    const CellSummary t = sweep.summary("TILT", lam);
    CAPTURE(lam);
    CHECK(std::abs(t.mean - erm.mean) <= 2.0 * std::sqrt(t.se * t.se + erm.se * erm.se));
  }
}
