#include <algorithm>
#include <cmath>
#include <random>

#include "parallel.hpp"
#include "tilt/errors.hpp"
#include "tilt/experiments.hpp"
#include "tilt/solvers.hpp"

namespace tilt {
namespace {

void validate_bounded(const ExperimentConfig& cfg) {
  const BoundedRatioSettings& s = cfg.bounded;
  if (cfg.trials < 1) throw ConfigError("trials", "must be at least 1");
  if (cfg.n_source < 1) throw ConfigError("n_source", "must be at least 1");
  if (cfg.n_target < 1) throw ConfigError("n_target", "must be at least 1");
  if (!(cfg.noise_sd >= 0.0)) throw ConfigError("noise_sd", "must be nonnegative");
  if (cfg.lambda_grid.empty()) throw ConfigError("lambda_grid", "must be nonempty");
  for (double l : cfg.lambda_grid) {
    if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("lambda_grid", "entries must be positive");
  }
  if (!(s.kappa >= 0.0) || !std::isfinite(s.kappa)) {
    throw ConfigError("bounded.kappa", "must be a finite nonnegative number");
  }
  if (s.dims.empty()) throw ConfigError("bounded.dims", "must be nonempty");
  for (const auto& [df, db] : s.dims) {
    if (df < 1 || db < 1) throw ConfigError("bounded.dims", "dimensions must be positive");
  }
  if (s.truth_coeffs.empty()) throw ConfigError("bounded.truth_coeffs", "must be nonempty");
  if (s.quad_points < 2) throw ConfigError("bounded.quad_points", "must be at least 2");
}

}  // namespace

BoundedRatioResult run_bounded_ratio_sweep(const ExperimentConfig& cfg, int threads) {
  validate_bounded(cfg);
  const BoundedRatioSettings& s = cfg.bounded;
  const std::string experiment = to_string(ExperimentKind::BoundedRatioSweep);
  const DensityModel p = DensityModel::uniform();
  const DensityModel q = DensityModel::tilted_cosine(s.kappa);

  const FeatureMap truth_map =
      FeatureMap::shifted_legendre(static_cast<int>(s.truth_coeffs.size()) - 1);
  const Eigen::VectorXd truth_coeffs = Eigen::Map<const Eigen::VectorXd>(
      s.truth_coeffs.data(), static_cast<Eigen::Index>(s.truth_coeffs.size()));
  const TargetFunction truth{
      [truth_map, truth_coeffs](double x) { return truth_map.featurize(x).dot(truth_coeffs); },
      "shifted Legendre expansion"};

  std::vector<int> f_dims;
  int max_df = 1;
  for (const auto& [df, db] : s.dims) {
    if (std::find(f_dims.begin(), f_dims.end(), df) == f_dims.end()) f_dims.push_back(df);
    max_df = std::max(max_df, df);
  }

  // One population context per grid lambda, shared read-only by all trials.
  std::vector<PopulationContext> contexts;
  contexts.reserve(cfg.lambda_grid.size());
  for (double lambda : cfg.lambda_grid) {
    contexts.emplace_back(p, q, lambda, s.quad_points, QuadRule::GaussLegendre);
  }
  const Quadrature& quad = contexts.front().quadrature();
  const auto& dens = contexts.front().node_densities();
  const Eigen::MatrixXd quad_design =
      FeatureMap::shifted_legendre(max_df - 1).design_matrix(quad.nodes);
  Eigen::VectorXd quad_truth(static_cast<Eigen::Index>(quad.size()));
  Eigen::VectorXd quad_wq(static_cast<Eigen::Index>(quad.size()));
  for (std::size_t i = 0; i < quad.size(); ++i) {
    quad_truth[static_cast<Eigen::Index>(i)] = truth(quad.nodes[i]);
    quad_wq[static_cast<Eigen::Index>(i)] = quad.weights[i] * dens.q[i];
  }
  auto target_mse_of = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd r = quad_design.leftCols(theta.size()) * theta - quad_truth;
    return quad_wq.dot(r.cwiseProduct(r));
  };

  struct Slot {
    std::vector<TrialResult> rows;
    std::vector<ErrLambdaRecord> err;
  };
  std::vector<Slot> slots(cfg.trials);
  detail::parallel_for(cfg.trials, threads, [&](std::size_t trial) {
    const std::uint64_t seed = stream_seed(cfg.seed, 0, trial);
    Rng rng(seed);
    LabeledSample src;
    src.xs = p.sample(rng, cfg.n_source);
    std::normal_distribution<double> noise(0.0, 1.0);
    src.ys.resize(src.xs.size());
    for (std::size_t i = 0; i < src.xs.size(); ++i) {
      src.ys[i] = truth(src.xs[i]) + cfg.noise_sd * noise(rng);
    }
    const UnlabeledSample tgt{q.sample(rng, cfg.n_target)};

    auto make_row = [&](Method method, int d_f, int d_b) {
      TrialResult r;
      r.experiment = experiment;
      r.method = to_string(method);
      r.level_or_L = s.kappa;
      r.n = cfg.n_source;
      r.m = cfg.n_target;
      r.d_f = d_f;
      r.d_b = d_b;
      r.seed = seed;
      r.trial = trial;
      return r;
    };
    auto finish = [](TrialResult& r) {
      if (!std::isfinite(r.target_mse)) {
        r.status = "failed";
        r.target_mse = kNotApplicable;
      }
    };

    Slot& slot = slots[trial];
    if (cfg.uses(Method::SourceERM)) {
      for (int df : f_dims) {
        TrialResult row = make_row(Method::SourceERM, df, 0);
        row.series = erm_series(df);
        try {
          const std::vector<double> ones(src.n(), 1.0);
          row.target_mse = target_mse_of(
              weighted_ridge_fit(src, FeatureMap::shifted_legendre(df - 1), ones, cfg.ridge_f));
        } catch (const std::exception&) {
          row.target_mse = kNotApplicable;
        }
        finish(row);
        slot.rows.push_back(std::move(row));
      }
    }
    if (cfg.uses(Method::TILT)) {
      for (const auto& [df, db] : s.dims) {
        const FeatureMap fmap = FeatureMap::shifted_legendre(df - 1);
        const TiltProblem problem(src, tgt, fmap, FeatureMap::fourier(db));
        for (std::size_t k = 0; k < cfg.lambda_grid.size(); ++k) {
          const double lambda = cfg.lambda_grid[k];
          TrialResult row = make_row(Method::TILT, df, db);
          row.series = tilt_series(df, db);
          row.lambda = lambda;
          row.key = lambda;
          try {
            const Eigen::VectorXd theta = problem.solve({lambda, cfg.ridge_f, cfg.ridge_b}).theta;
            row.target_mse = target_mse_of(theta);
            const RealFunction f = [&fmap, &theta](double x) {
              return evaluate_expansion(fmap, theta, x);
            };
            slot.err.push_back(
                {df, db, lambda, trial, (1.0 + lambda) * err_lambda_sq(contexts[k], f, truth)});
          } catch (const std::exception&) {
            row.target_mse = kNotApplicable;
          }
          finish(row);
          slot.rows.push_back(std::move(row));
        }
      }
    }
  });

  BoundedRatioResult result;
  result.sweep.experiment = experiment;
  for (auto& slot : slots) {
    for (auto& r : slot.rows) result.sweep.trials.push_back(std::move(r));
    for (auto& e : slot.err) result.err_lambda.push_back(e);
  }
  result.sweep.aggregates = aggregate(result.sweep.trials);
  result.ratio_bounds = tilted_cosine_ratio_bounds(s.kappa);
  return result;
}

}  // namespace tilt
