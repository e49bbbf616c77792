#include <cmath>
#include <random>

#include "parallel.hpp"
#include "tilt/errors.hpp"
#include "tilt/experiments.hpp"
#include "tilt/solvers.hpp"

namespace tilt {
namespace {

struct LinearData {
  LabeledSample src;
  UnlabeledSample tgt;
  std::vector<double> test_xs;
  std::vector<double> test_truth;
};

LinearData draw_linear_data(const ExperimentConfig& cfg, const DensityModel& source,
                            const TargetFunction& truth, Rng& rng) {
  const DensityModel& target = cfg.linear.target;
  LinearData d;
  d.src.xs = source.sample(rng, cfg.n_source);
  std::normal_distribution<double> noise(0.0, 1.0);
  d.src.ys.resize(cfg.n_source);
  for (std::size_t i = 0; i < cfg.n_source; ++i) {
    d.src.ys[i] = truth(d.src.xs[i]) + cfg.noise_sd * noise(rng);
  }
  d.tgt.xs = target.sample(rng, cfg.n_target);
  d.test_xs = target.sample(rng, cfg.n_test);
  d.test_truth.resize(d.test_xs.size());
  for (std::size_t i = 0; i < d.test_xs.size(); ++i) d.test_truth[i] = truth(d.test_xs[i]);
  return d;
}

double test_mse(const Eigen::MatrixXd& test_design, const Eigen::VectorXd& theta,
                const std::vector<double>& truth) {
  const Eigen::VectorXd pred = test_design * theta;
  const Eigen::Map<const Eigen::VectorXd> y(truth.data(), static_cast<Eigen::Index>(truth.size()));
  return (pred - y).squaredNorm() / static_cast<double>(truth.size());
}

void validate_common(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw ConfigError("trials", "must be at least 1");
  if (cfg.n_source < 1) throw ConfigError("n_source", "must be at least 1");
  if (cfg.n_target < 1) throw ConfigError("n_target", "must be at least 1");
  if (!(cfg.noise_sd >= 0.0)) throw ConfigError("noise_sd", "must be nonnegative");
  if (cfg.lambda_grid.empty()) throw ConfigError("lambda_grid", "must be nonempty");
  for (double l : cfg.lambda_grid) {
    if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("lambda_grid", "entries must be positive");
  }
  if (cfg.methods.empty()) throw ConfigError("methods", "must be nonempty");
}

void validate_linear(const ExperimentConfig& cfg) {
  validate_common(cfg);
  if (cfg.n_test < 1) throw ConfigError("n_test", "must be at least 1");
  if (cfg.linear.levels.empty()) throw ConfigError("linear.levels", "must be nonempty");
  for (double t : cfg.linear.levels) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("linear.levels", "levels must lie in [0,1]");
  }
  if (cfg.linear.f_degree < 0) throw ConfigError("linear.f_degree", "must be nonnegative");
  if (cfg.linear.rbf_count < 1) throw ConfigError("linear.rbf_count", "must be at least 1");
  if (!(cfg.linear.rbf_bandwidth > 0.0)) {
    throw ConfigError("linear.rbf_bandwidth", "must be positive");
  }
}

/// Everything one (level, trial) pair needs, shared by both linear runners.
struct LinearCell {
  const ExperimentConfig& cfg;
  const TargetFunction& truth;
  FeatureMap fmap;
  FeatureMap bmap;
  std::string experiment;
};

TrialResult base_row(const LinearCell& cell, Method method, double level, std::uint64_t seed,
                     std::size_t trial) {
  TrialResult r;
  r.experiment = cell.experiment;
  r.method = to_string(method);
  r.series = r.method;
  r.level_or_L = level;
  r.key = level;
  r.n = cell.cfg.n_source;
  r.m = cell.cfg.n_target;
  r.d_f = cell.fmap.output_dim();
  r.seed = seed;
  r.trial = trial;
  return r;
}

template <class Fn>
void guarded(TrialResult& row, Fn&& fn) {
  try {
    fn();
    if (!std::isfinite(row.target_mse)) throw NumericError("non-finite target MSE");
  } catch (const Error&) {
    row.status = "failed";
    row.target_mse = kNotApplicable;
  } catch (const std::exception&) {
    row.status = "failed";
    row.target_mse = kNotApplicable;
  }
}

/// Best-by-test-MSE weighted fit over a list of weight vectors.
void tune_weighted(TrialResult& row, const Eigen::MatrixXd& design, const LinearData& d,
                   const Eigen::MatrixXd& test_design, double ridge,
                   const std::vector<std::pair<double, std::vector<double>>>& weightings) {
  std::vector<TuningCandidate> candidates;
  for (const auto& [lambda, w] : weightings) {
    const Eigen::VectorXd theta = weighted_ridge_fit(design, d.src.ys, w, ridge);
    candidates.push_back({lambda, 0, test_mse(test_design, theta, d.test_truth)});
  }
  const auto best = candidates[oracle_tune(candidates)];
  row.lambda = best.lambda;
  row.target_mse = best.target_mse;
}

/// Rows for every configured method except the TILT lambda sweep, which the
/// caller handles so the sensitivity runner can keep all grid points.
std::vector<TrialResult> fit_linear_baselines(const LinearCell& cell, const DensityModel& source,
                                              double level, const LinearData& d,
                                              const Eigen::MatrixXd& design,
                                              const Eigen::MatrixXd& test_design,
                                              std::uint64_t seed, std::size_t trial, Rng& rng,
                                              const std::vector<Method>& methods) {
  const ExperimentConfig& cfg = cell.cfg;
  const DensityModel& target = cfg.linear.target;
  std::vector<TrialResult> rows;
  for (Method method : methods) {
    if (method == Method::TILT) continue;
    TrialResult row = base_row(cell, method, level, seed, trial);
    guarded(row, [&] {
      switch (method) {
        case Method::SourceERM: {
          const std::vector<double> ones(d.src.n(), 1.0);
          const Eigen::VectorXd theta = weighted_ridge_fit(design, d.src.ys, ones, cfg.ridge_f);
          row.target_mse = test_mse(test_design, theta, d.test_truth);
          break;
        }
        case Method::ExactIW: {
          const auto w = exact_ratio_weights(source, target, d.src.xs);
          const Eigen::VectorXd theta = weighted_ridge_fit(design, d.src.ys, w, cfg.ridge_f);
          row.target_mse = test_mse(test_design, theta, d.test_truth);
          break;
        }
        case Method::ExactRuLSIF: {
          std::vector<std::pair<double, std::vector<double>>> weightings;
          for (double lambda : cfg.lambda_grid) {
            weightings.emplace_back(lambda,
                                    exact_relative_weights(source, target, lambda, d.src.xs));
          }
          tune_weighted(row, design, d, test_design, cfg.ridge_f, weightings);
          break;
        }
        case Method::KernelRuLSIF: {
          std::vector<std::pair<double, std::vector<double>>> weightings;
          for (double lambda : cfg.linear.kernel_rulsif_lambdas) {
            const double alpha = lambda / (1.0 + lambda);
            const auto est = kernel_relative_ratio_fit_auto(d.src.xs, d.tgt.xs, alpha, rng);
            weightings.emplace_back(lambda, est(d.src.xs));
          }
          tune_weighted(row, design, d, test_design, cfg.ridge_f, weightings);
          break;
        }
        case Method::TILT:
          break;
      }
    });
    rows.push_back(std::move(row));
  }
  return rows;
}

/// TILT fits over the lambda grid; entries are NaN for failed solves.
std::vector<double> tilt_lambda_path(const LinearCell& cell, const LinearData& d,
                                     const Eigen::MatrixXd& test_design) {
  const ExperimentConfig& cfg = cell.cfg;
  const TiltProblem problem(d.src, d.tgt, cell.fmap, cell.bmap);
  std::vector<double> mse(cfg.lambda_grid.size(), kNotApplicable);
  for (std::size_t k = 0; k < cfg.lambda_grid.size(); ++k) {
    try {
      const TiltFit fit = problem.solve({cfg.lambda_grid[k], cfg.ridge_f, cfg.ridge_b});
      // Deployment uses theta only; gamma never enters the evaluation.
      mse[k] = test_mse(test_design, fit.theta, d.test_truth);
    } catch (const Error&) {
    }
  }
  return mse;
}

LinearCell make_cell(const ExperimentConfig& cfg, const TargetFunction& truth,
                     ExperimentKind kind) {
  return LinearCell{cfg, truth, FeatureMap::shifted_legendre(cfg.linear.f_degree),
                    FeatureMap::gaussian_rbf_uniform(cfg.linear.rbf_count, cfg.linear.rbf_bandwidth),
                    to_string(kind)};
}

ShiftPath linear_path(const ExperimentConfig& cfg) {
  return ShiftPath{cfg.linear.target, cfg.linear.source_endpoint, cfg.linear.levels};
}

}  // namespace

SweepResult run_linear_shift_sweep(const ExperimentConfig& cfg, int threads) {
  validate_linear(cfg);
  const TargetFunction truth = cfg.linear.truth.to_function();
  const LinearCell cell = make_cell(cfg, truth, ExperimentKind::LinearShiftSweep);
  const ShiftPath path = linear_path(cfg);
  const std::size_t levels = cfg.linear.levels.size();
  const std::size_t jobs = levels * cfg.trials;
  std::vector<std::vector<TrialResult>> slots(jobs);

  detail::parallel_for(jobs, threads, [&](std::size_t job) {
    const std::size_t li = job / cfg.trials;
    const std::size_t trial = job % cfg.trials;
    const double level = cfg.linear.levels[li];
    const DensityModel source = interpolate_source(path, level);
    const std::uint64_t seed = stream_seed(cfg.seed, li, trial);
    Rng rng(seed);
    const LinearData d = draw_linear_data(cfg, source, truth, rng);
    const Eigen::MatrixXd design = cell.fmap.design_matrix(d.src.xs);
    const Eigen::MatrixXd test_design = cell.fmap.design_matrix(d.test_xs);

    auto& rows = slots[job];
    rows = fit_linear_baselines(cell, source, level, d, design, test_design, seed, trial, rng,
                                cfg.methods);
    if (cfg.uses(Method::TILT)) {
      TrialResult row = base_row(cell, Method::TILT, level, seed, trial);
      row.d_b = cell.bmap.output_dim();
      guarded(row, [&] {
        const auto mse = tilt_lambda_path(cell, d, test_design);
        std::vector<TuningCandidate> candidates;
        for (std::size_t k = 0; k < mse.size(); ++k) {
          candidates.push_back({cfg.lambda_grid[k], row.d_b, mse[k]});
        }
        const auto best = candidates[oracle_tune(candidates)];
        if (std::isnan(best.target_mse)) throw NumericError("every lambda failed");
        row.lambda = best.lambda;
        row.target_mse = best.target_mse;
      });
      rows.push_back(std::move(row));
    }
  });

  SweepResult result;
  result.experiment = cell.experiment;
  for (auto& rows : slots) {
    for (auto& r : rows) result.trials.push_back(std::move(r));
  }
  result.aggregates = aggregate(result.trials);
  return result;
}

SweepResult run_lambda_sensitivity(const ExperimentConfig& cfg, int threads) {
  validate_linear(cfg);
  const double level = cfg.linear.sensitivity_level;
  if (!(level >= 0.0 && level <= 1.0)) {
    throw ConfigError("linear.sensitivity_level", "must lie in [0,1]");
  }
  const TargetFunction truth = cfg.linear.truth.to_function();
  const LinearCell cell = make_cell(cfg, truth, ExperimentKind::LambdaSensitivity);
  const DensityModel source = interpolate_source(linear_path(cfg), level);
  std::vector<std::vector<TrialResult>> slots(cfg.trials);

  detail::parallel_for(cfg.trials, threads, [&](std::size_t trial) {
    const std::uint64_t seed = stream_seed(cfg.seed, 0, trial);
    Rng rng(seed);
    const LinearData d = draw_linear_data(cfg, source, truth, rng);
    const Eigen::MatrixXd design = cell.fmap.design_matrix(d.src.xs);
    const Eigen::MatrixXd test_design = cell.fmap.design_matrix(d.test_xs);

    auto& rows = slots[trial];
    // Reference rows carry no lambda; they aggregate under key NaN.
    std::vector<Method> refs;
    for (Method m : cfg.methods) {
      if (m == Method::SourceERM) refs.push_back(m);
    }
    rows = fit_linear_baselines(cell, source, level, d, design, test_design, seed, trial, rng,
                                refs);
    for (auto& r : rows) r.key = kNotApplicable;
    if (cfg.uses(Method::TILT)) {
      std::vector<double> mse;
      bool failed = false;
      try {
        mse = tilt_lambda_path(cell, d, test_design);
      } catch (const std::exception&) {
        failed = true;
      }
      for (std::size_t k = 0; k < cfg.lambda_grid.size(); ++k) {
        TrialResult row = base_row(cell, Method::TILT, level, seed, trial);
        row.d_b = cell.bmap.output_dim();
        row.lambda = cfg.lambda_grid[k];
        row.key = row.lambda;
        row.target_mse = failed ? kNotApplicable : mse[k];
        if (!std::isfinite(row.target_mse)) {
          row.status = "failed";
          row.target_mse = kNotApplicable;
        }
        rows.push_back(std::move(row));
      }
    }
  });

  SweepResult result;
  result.experiment = cell.experiment;
  for (auto& rows : slots) {
    for (auto& r : rows) result.trials.push_back(std::move(r));
  }
  result.aggregates = aggregate(result.trials);
  return result;
}

}  // namespace tilt
