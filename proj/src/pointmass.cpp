#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "parallel.hpp"
#include "tilt/errors.hpp"
#include "tilt/experiments.hpp"
#include "tilt/solvers.hpp"

namespace tilt {
namespace {

void validate_pointmass(const ExperimentConfig& cfg) {
  const PointMassSettings& s = cfg.pointmass;
  if (cfg.trials < 1) throw ConfigError("trials", "must be at least 1");
  if (!(cfg.noise_sd >= 0.0)) throw ConfigError("noise_sd", "must be nonnegative");
  if (cfg.lambda_grid.empty()) throw ConfigError("lambda_grid", "must be nonempty");
  for (double l : cfg.lambda_grid) {
    if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("lambda_grid", "entries must be positive");
  }
  if (s.n_grid.empty()) throw ConfigError("pointmass.n_grid", "must be nonempty");
  if (s.L_grid.empty()) throw ConfigError("pointmass.L_grid", "must be nonempty");
  for (int n : s.n_grid) {
    if (n < 1) throw ConfigError("pointmass.n_grid", "entries must be positive");
  }
  for (int L : s.L_grid) {
    if (L < 1) throw ConfigError("pointmass.L_grid", "entries must be at least 1");
  }
  if (!(s.smoothness > 0.0)) throw ConfigError("pointmass.smoothness", "must be positive");
  if (s.series_terms < 1) throw ConfigError("pointmass.series_terms", "must be positive");
  if (s.b_multipliers.empty()) throw ConfigError("pointmass.b_multipliers", "must be nonempty");
  for (int k : s.b_multipliers) {
    if (k < 1) throw ConfigError("pointmass.b_multipliers", "entries must be at least 1");
  }
  if (s.b_dim_cap < 1) throw ConfigError("pointmass.b_dim_cap", "must be positive");
  if (!(s.target_ratio > 0.0)) throw ConfigError("pointmass.target_ratio", "must be positive");
  if (s.quad_points < 3 || s.quad_points % 2 == 0) {
    throw ConfigError("pointmass.quad_points", "must be odd and at least 3");
  }
  if (!cfg.uses(Method::TILT) && !cfg.uses(Method::SourceERM)) {
    throw ConfigError("methods", "point-mass runs support TILT and SourceERM");
  }
}

/// Sine design and truth on the quadrature grid, shared by every fit.
struct QuadGrid {
  Quadrature quad;
  Eigen::MatrixXd design;  // nodes x max_dim
  Eigen::VectorXd truth;

  double mse(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd r = design.leftCols(theta.size()) * theta - truth;
    double s = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) s += quad.weights[static_cast<std::size_t>(i)] * r[i] * r[i];
    return s;
  }
};

struct CellPlan {
  int n;
  int L;
  int d_f;
  int d_erm;
  std::vector<int> b_dims;
};

}  // namespace

RateReport run_pointmass_rate(const ExperimentConfig& cfg, int threads) {
  validate_pointmass(cfg);
  const PointMassSettings& s = cfg.pointmass;
  const TargetFunction truth = sine_series_truth(s.smoothness, s.series_terms);
  const std::string experiment = to_string(ExperimentKind::PointMassRate);

  RateReport report;
  std::vector<CellPlan> plans;
  std::vector<std::size_t> cell_ids;
  int max_dim = 1;
  for (std::size_t ni = 0; ni < s.n_grid.size(); ++ni) {
    for (std::size_t li = 0; li < s.L_grid.size(); ++li) {
      const int n = s.n_grid[ni];
      const int L = s.L_grid[li];
      const double eff = static_cast<double>(n) / L;
      if (eff < 2.0) {
        std::ostringstream os;
        os << "skipped cell n=" << n << ", L=" << L << ": n/L < 2";
        report.warnings.push_back(os.str());
        continue;
      }
      CellPlan plan{n, L, rate_dimension(eff, s.smoothness), 0, {}};
      plan.d_erm = s.erm_dim_rule == ErmDimRule::Effective
                       ? plan.d_f
                       : rate_dimension(static_cast<double>(n), s.smoothness);
      for (int k : s.b_multipliers) {
        const int d = std::min(k * plan.d_f, s.b_dim_cap);
        if (std::find(plan.b_dims.begin(), plan.b_dims.end(), d) == plan.b_dims.end()) {
          plan.b_dims.push_back(d);
        }
      }
      std::sort(plan.b_dims.begin(), plan.b_dims.end());
      max_dim = std::max({max_dim, plan.d_f, plan.d_erm, plan.b_dims.back()});
      plans.push_back(std::move(plan));
      cell_ids.push_back(ni * s.L_grid.size() + li);
    }
  }

  QuadGrid grid{Quadrature::trapezoid(s.quad_points), {}, {}};
  grid.design = FeatureMap::sine(max_dim).design_matrix(grid.quad.nodes);
  grid.truth.resize(static_cast<Eigen::Index>(grid.quad.size()));
  for (std::size_t i = 0; i < grid.quad.size(); ++i) {
    grid.truth[static_cast<Eigen::Index>(i)] = truth(grid.quad.nodes[i]);
  }

  const std::size_t jobs = plans.size() * cfg.trials;
  std::vector<std::vector<TrialResult>> slots(jobs);
  detail::parallel_for(jobs, threads, [&](std::size_t job) {
    const CellPlan& plan = plans[job / cfg.trials];
    const std::size_t trial = job % cfg.trials;
    const std::uint64_t seed = stream_seed(cfg.seed, cell_ids[job / cfg.trials], trial);
    Rng rng(seed);
    const auto m = static_cast<std::size_t>(std::max(1.0, std::round(s.target_ratio * plan.n)));
    const DensityModel source =
        DensityModel::atom_mixture(0.0, 1.0 - 1.0 / plan.L, DensityModel::uniform());
    LabeledSample src;
    src.xs = source.sample(rng, static_cast<std::size_t>(plan.n));
    std::normal_distribution<double> noise(0.0, 1.0);
    src.ys.resize(src.xs.size());
    for (std::size_t i = 0; i < src.xs.size(); ++i) {
      src.ys[i] = truth(src.xs[i]) + cfg.noise_sd * noise(rng);
    }
    UnlabeledSample tgt{DensityModel::uniform().sample(rng, m)};

    auto make_row = [&](Method method) {
      TrialResult r;
      r.experiment = experiment;
      r.method = to_string(method);
      r.series = rate_series(method, plan.n);
      r.level_or_L = plan.L;
      r.key = plan.L;
      r.n = static_cast<std::size_t>(plan.n);
      r.m = m;
      r.seed = seed;
      r.trial = trial;
      return r;
    };
    auto fail = [](TrialResult& r) {
      r.status = "failed";
      r.target_mse = kNotApplicable;
    };

    auto& rows = slots[job];
    if (cfg.uses(Method::SourceERM)) {
      TrialResult row = make_row(Method::SourceERM);
      row.d_f = plan.d_erm;
      try {
        const std::vector<double> ones(src.n(), 1.0);
        const Eigen::VectorXd theta =
            weighted_ridge_fit(src, FeatureMap::sine(plan.d_erm), ones, cfg.ridge_f);
        row.target_mse = grid.mse(theta);
        if (!std::isfinite(row.target_mse)) fail(row);
      } catch (const std::exception&) {
        fail(row);
      }
      rows.push_back(std::move(row));
    }
    if (cfg.uses(Method::TILT)) {
      TrialResult row = make_row(Method::TILT);
      row.d_f = plan.d_f;
      try {
        const FeatureMap fmap = FeatureMap::sine(plan.d_f);
        std::vector<TuningCandidate> candidates;
        for (int d_b : plan.b_dims) {
          const TiltProblem problem(src, tgt, fmap, FeatureMap::sine(d_b));
          for (double lambda : cfg.lambda_grid) {
            double mse = kNotApplicable;
            try {
              mse = grid.mse(problem.solve({lambda, cfg.ridge_f, cfg.ridge_b}).theta);
            } catch (const Error&) {
            }
            candidates.push_back({lambda, d_b, mse});
          }
        }
        const auto best = candidates[oracle_tune(candidates)];
        row.lambda = best.lambda;
        row.d_b = best.b_dim;
        row.target_mse = best.target_mse;
        if (!std::isfinite(row.target_mse)) fail(row);
      } catch (const std::exception&) {
        fail(row);
      }
      rows.push_back(std::move(row));
    }
  });

  for (auto& rows : slots) {
    for (auto& r : rows) report.sweep.trials.push_back(std::move(r));
  }
  report.sweep.experiment = experiment;
  report.sweep.aggregates = aggregate(report.sweep.trials);

  std::vector<std::pair<double, double>> tilt_points;
  std::vector<std::pair<double, double>> erm_points;
  const CellSummary empty{kNotApplicable, kNotApplicable, kNotApplicable, 0, 0};
  for (const auto& plan : plans) {
    RateCell cell{plan.n, plan.L, static_cast<double>(plan.n) / plan.L, plan.d_f, plan.d_erm,
                  empty, empty};
    if (cfg.uses(Method::TILT)) {
      cell.tilt = report.sweep.summary(rate_series(Method::TILT, plan.n), plan.L);
      if (cell.tilt.mean > 0.0) tilt_points.emplace_back(cell.n_over_L, cell.tilt.mean);
    }
    if (cfg.uses(Method::SourceERM)) {
      cell.erm = report.sweep.summary(rate_series(Method::SourceERM, plan.n), plan.L);
      if (cell.erm.mean > 0.0) erm_points.emplace_back(cell.n_over_L, cell.erm.mean);
    }
    report.cells.push_back(cell);
  }
  const LogLogFit none{kNotApplicable, kNotApplicable, kNotApplicable};
  auto fit_or_warn = [&](const std::vector<std::pair<double, double>>& pts, const char* name) {
    bool distinct = false;
    for (const auto& p : pts) distinct = distinct || p.first != pts.front().first;
    if (pts.size() < 3 || !distinct) {
      report.warnings.push_back(std::string("not enough cells to fit the ") + name + " slope");
      return none;
    }
    return fit_loglog_slope(pts);
  };
  report.tilt_fit = cfg.uses(Method::TILT) ? fit_or_warn(tilt_points, "TILT") : none;
  report.erm_fit = cfg.uses(Method::SourceERM) ? fit_or_warn(erm_points, "SourceERM") : none;
  return report;
}

}  // namespace tilt
