#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tilt/densities.hpp"
#include "tilt/population.hpp"
#include "tilt/quadrature.hpp"

namespace tilt {

enum class ExperimentKind { LinearShiftSweep, LambdaSensitivity, PointMassRate, BoundedRatioSweep };
enum class Method { SourceERM, ExactIW, ExactRuLSIF, KernelRuLSIF, TILT };

std::string to_string(ExperimentKind kind);
std::string to_string(Method method);

/// Cubic Legendre base plus a localized oscillating residual
///   a exp(-(x - x0)^2 / (2 s^2)) sin(omega x).
struct LinearTruth {
  std::vector<double> legendre_coeffs{0.3, 0.6, -0.4, 0.25};
  double bump_amplitude = 0.8;
  double bump_center = 0.85;
  double bump_width = 0.05;
  double bump_frequency = 40.0;

  TargetFunction to_function() const;
};

struct LinearShiftSettings {
  DensityModel target = DensityModel::beta(2.0, 5.0);
  DensityModel source_endpoint = DensityModel::beta(5.0, 2.0);
  std::vector<double> levels = ShiftPath::equally_spaced_levels(21);
  int f_degree = 3;
  int rbf_count = 25;
  double rbf_bandwidth = 0.4;
  LinearTruth truth;
  /// Level used by the lambda-sensitivity experiment.
  double sensitivity_level = 0.7;
  /// Kernel RuLSIF tunes lambda over this (short) grid; alpha = lambda / (1 + lambda).
  std::vector<double> kernel_rulsif_lambdas{0.1, 1.0, 10.0};
};

/// Which dimension source ERM uses in the point-mass experiment: the
/// shift-aware round((n/L)^(1/(2 beta + 1))) or the shift-unaware
/// round(n^(1/(2 beta + 1))).
enum class ErmDimRule { Effective, Nominal };

struct PointMassSettings {
  std::vector<int> n_grid{512, 1024, 2048, 4096, 8192};
  std::vector<int> L_grid{1, 2, 4, 8};
  double smoothness = 2.0;
  int series_terms = 200;
  std::vector<int> b_multipliers{1, 2, 4};
  int b_dim_cap = 64;
  /// Target sample size as a multiple of n.
  double target_ratio = 1.0;
  ErmDimRule erm_dim_rule = ErmDimRule::Nominal;
  int quad_points = 20001;
};

struct BoundedRatioSettings {
  /// 0.5 ln(7.8 / 0.13): max/min of q/p equals 7.8 / 0.13.
  double kappa = 0.5 * 4.0943445622221004;
  std::vector<std::pair<int, int>> dims{{20, 8}, {8, 20}, {8, 8}, {20, 20}};
  /// Shifted-Legendre coefficients of f*; 20 terms makes d_f = 20 well specified.
  std::vector<double> truth_coeffs;
  int quad_points = 512;

  BoundedRatioSettings();
};

struct ExperimentConfig {
  int schema_version = 1;
  ExperimentKind experiment = ExperimentKind::LinearShiftSweep;
  std::size_t n_source = 320;
  std::size_t n_target = 320;
  std::size_t n_test = 12000;
  std::size_t trials = 20;
  double noise_sd = 0.2;
  std::vector<double> lambda_grid = log_grid(-6.0, 4.0, 21);
  std::vector<Method> methods{Method::SourceERM, Method::ExactIW, Method::ExactRuLSIF, Method::TILT};
  std::uint64_t seed = 20260101;
  double ridge_f = 1e-8;
  double ridge_b = 1e-8;

  LinearShiftSettings linear;
  PointMassSettings pointmass;
  BoundedRatioSettings bounded;

  bool uses(Method method) const;
  /// Full-scale defaults for the given experiment.
  static ExperimentConfig defaults(ExperimentKind kind);
  static std::vector<double> log_grid(double log10_min, double log10_max, std::size_t count);
};

inline constexpr double kNotApplicable = std::numeric_limits<double>::quiet_NaN();

/// One row of the per-trial CSV.
struct TrialResult {
  std::string experiment;
  std::string method;
  double level_or_L = kNotApplicable;
  std::size_t n = 0;
  std::size_t m = 0;
  double lambda = kNotApplicable;
  int d_f = 0;
  int d_b = 0;
  double target_mse = kNotApplicable;
  std::uint64_t seed = 0;
  std::size_t trial = 0;
  std::string status = "ok";
  /// Aggregation label: the method plus any configuration tags.
  std::string series;
  /// Aggregation key: level, L, or lambda depending on the experiment.
  double key = kNotApplicable;
};

struct AggregateRow {
  std::string experiment;
  std::string series;
  double key;
  double mean;
  double q25;
  double q75;
  std::size_t count;
};

struct CellSummary {
  double mean;
  double sd;
  double se;
  std::size_t ok;     ///< rows with status ok
  std::size_t count;  ///< all rows of the cell
};

struct SweepResult {
  std::string experiment;
  std::vector<TrialResult> trials;
  std::vector<AggregateRow> aggregates;

  /// Mean/sd/se of target MSE over ok rows of (series, key).
  CellSummary summary(const std::string& series, double key) const;
  std::vector<double> keys(const std::string& series) const;
};

/// Type-7 quantile of unsorted values.
double quantile(std::vector<double> values, double prob);

/// Groups rows by (series, key) in first-appearance order.
std::vector<AggregateRow> aggregate(std::span<const TrialResult> trials);

struct LogLogFit {
  double slope;
  double intercept;
  double r2;
};

/// Ordinary least squares of log y on log x.
LogLogFit fit_loglog_slope(std::span<const std::pair<double, double>> points);

struct TuningCandidate {
  double lambda;
  int b_dim;
  double target_mse;
};

/// argmin of target_mse; ties go to the smaller lambda, then the smaller B.
std::size_t oracle_tune(std::span<const TuningCandidate> candidates);

struct Predictor {
  RealFunction f;
  double lambda = 0.0;
  int b_dim = 0;
};

/// Exact target MSE E_Q[(f - f*)^2] by quadrature.
double target_mse(const RealFunction& f, const TargetFunction& truth,
                  const DensityModel& target_law, const Quadrature& quad);

std::size_t oracle_tune(std::span<const Predictor> candidates, const TargetFunction& truth,
                        const DensityModel& target_law, const Quadrature& quad);

/// D_F = max(1, round(size^(1/(2 beta + 1)))).
int rate_dimension(double effective_size, double smoothness);

/// f*(x) = sum_{k=1}^{terms} (-1)^(k-1) k^-(beta + 1/2) sqrt2 sin(pi k x).
TargetFunction sine_series_truth(double smoothness, int terms);

SweepResult run_linear_shift_sweep(const ExperimentConfig& cfg, int threads = 1);
SweepResult run_lambda_sensitivity(const ExperimentConfig& cfg, int threads = 1);

struct RateCell {
  int n;
  int L;
  double n_over_L;
  int d_f;
  int d_erm;
  CellSummary tilt;
  CellSummary erm;
};

struct RateReport {
  SweepResult sweep;
  std::vector<RateCell> cells;
  LogLogFit tilt_fit;
  LogLogFit erm_fit;
  std::vector<std::string> warnings;
};

RateReport run_pointmass_rate(const ExperimentConfig& cfg, int threads = 1);

/// (1 + lambda) Err_lambda^2 of one fitted TILT predictor.
struct ErrLambdaRecord {
  int d_f;
  int d_b;
  double lambda;
  std::size_t trial;
  double scaled_err_lambda_sq;
};

struct BoundedRatioResult {
  SweepResult sweep;
  std::vector<ErrLambdaRecord> err_lambda;
  RatioBounds ratio_bounds;
};

BoundedRatioResult run_bounded_ratio_sweep(const ExperimentConfig& cfg, int threads = 1);

/// Label helpers shared by the runners, the CSV writers and the tests.
std::string tilt_series(int d_f, int d_b);
std::string erm_series(int d_f);
std::string rate_series(Method method, int n);

}  // namespace tilt
