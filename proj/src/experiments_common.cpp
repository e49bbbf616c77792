#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "tilt/errors.hpp"
#include "tilt/experiments.hpp"
#include "tilt/features.hpp"

namespace tilt {

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::LinearShiftSweep:
      return "linear_shift_sweep";
    case ExperimentKind::LambdaSensitivity:
      return "lambda_sensitivity";
    case ExperimentKind::PointMassRate:
      return "pointmass_rate";
    case ExperimentKind::BoundedRatioSweep:
      return "bounded_ratio_sweep";
  }
  return "unknown";
}

std::string to_string(Method method) {
  switch (method) {
    case Method::SourceERM:
      return "SourceERM";
    case Method::ExactIW:
      return "ExactIW";
    case Method::ExactRuLSIF:
      return "ExactRuLSIF";
    case Method::KernelRuLSIF:
      return "KernelRuLSIF";
    case Method::TILT:
      return "TILT";
  }
  return "unknown";
}

TargetFunction LinearTruth::to_function() const {
  const FeatureMap base = FeatureMap::shifted_legendre(static_cast<int>(legendre_coeffs.size()) - 1);
  const Eigen::VectorXd coeffs =
      Eigen::Map<const Eigen::VectorXd>(legendre_coeffs.data(),
                                        static_cast<Eigen::Index>(legendre_coeffs.size()));
  const double a = bump_amplitude;
  const double x0 = bump_center;
  const double inv = 1.0 / (2.0 * bump_width * bump_width);
  const double omega = bump_frequency;
  std::ostringstream os;
  os << "Legendre(" << legendre_coeffs.size() << " terms) + " << a << " exp(-(x-" << x0
     << ")^2/(2*" << bump_width << "^2)) sin(" << omega << " x)";
  return TargetFunction{[base, coeffs, a, x0, inv, omega](double x) {
                          const double d = x - x0;
                          return base.featurize(x).dot(coeffs) +
                                 a * std::exp(-d * d * inv) * std::sin(omega * x);
                        },
                        os.str()};
}

BoundedRatioSettings::BoundedRatioSettings() {
  // Uniform-measure projection onto degree 19 of a smooth trend plus a
  // mid-interval oscillation, so d_f = 20 is exact while d_f = 8 leaves a
  // residual where q is smallest.
  const Quadrature quad = Quadrature::gauss_legendre(512);
  const FeatureMap basis = FeatureMap::shifted_legendre(19);
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(basis.output_dim());
  for (std::size_t i = 0; i < quad.size(); ++i) {
    const double x = quad.nodes[i];
    const double d = x - 0.5;
    const double f = std::sin(2.0 * x) + 0.3 * x +
                     0.3 * std::exp(-d * d / (2.0 * 0.1 * 0.1)) * std::cos(6.0 * std::numbers::pi * d);
    coeffs += quad.weights[i] * f * basis.featurize(x);
  }
  truth_coeffs.assign(coeffs.data(), coeffs.data() + coeffs.size());
}

bool ExperimentConfig::uses(Method method) const {
  return std::find(methods.begin(), methods.end(), method) != methods.end();
}

std::vector<double> ExperimentConfig::log_grid(double log10_min, double log10_max,
                                               std::size_t count) {
  if (count == 0) throw DomainError("grid count must be positive");
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    grid[i] = std::pow(10.0, log10_min + t * (log10_max - log10_min));
  }
  // Pin the endpoints exactly.
  grid.front() = std::pow(10.0, log10_min);
  grid.back() = std::pow(10.0, log10_max);
  return grid;
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.experiment = kind;
  switch (kind) {
    case ExperimentKind::LinearShiftSweep:
    case ExperimentKind::LambdaSensitivity:
      cfg.trials = 100;
      cfg.noise_sd = 0.2;
      cfg.ridge_b = 1e-4;
      break;
    case ExperimentKind::PointMassRate:
      cfg.trials = 10;
      cfg.noise_sd = 0.2;
      cfg.methods = {Method::SourceERM, Method::TILT};
      break;
    case ExperimentKind::BoundedRatioSweep:
      cfg.trials = 100;
      cfg.noise_sd = 0.08;
      cfg.methods = {Method::SourceERM, Method::TILT};
      break;
  }
  return cfg;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) return kNotApplicable;
  std::sort(values.begin(), values.end());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

bool same_key(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

}  // namespace

std::vector<AggregateRow> aggregate(std::span<const TrialResult> trials) {
  struct Cell {
    std::string experiment;
    std::string series;
    double key;
    std::vector<double> values;
    std::size_t count = 0;
  };
  std::vector<Cell> cells;
  for (const auto& row : trials) {
    auto it = std::find_if(cells.begin(), cells.end(), [&row](const Cell& c) {
      return c.series == row.series && same_key(c.key, row.key);
    });
    if (it == cells.end()) {
      cells.push_back(Cell{row.experiment, row.series, row.key, {}, 0});
      it = std::prev(cells.end());
    }
    ++it->count;
    if (row.status == "ok") it->values.push_back(row.target_mse);
  }
  std::vector<AggregateRow> out;
  out.reserve(cells.size());
  for (const auto& c : cells) {
    double mean = kNotApplicable;
    if (!c.values.empty()) {
      mean = 0.0;
      for (double v : c.values) mean += v;
      mean /= static_cast<double>(c.values.size());
    }
    out.push_back(AggregateRow{c.experiment, c.series, c.key, mean, quantile(c.values, 0.25),
                               quantile(c.values, 0.75), c.count});
  }
  return out;
}

CellSummary SweepResult::summary(const std::string& series, double key) const {
  std::vector<double> values;
  std::size_t count = 0;
  for (const auto& row : trials) {
    if (row.series != series || !same_key(row.key, key)) continue;
    ++count;
    if (row.status == "ok") values.push_back(row.target_mse);
  }
  CellSummary s{kNotApplicable, kNotApplicable, kNotApplicable, values.size(), count};
  if (values.empty()) return s;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  s.mean = mean;
  s.sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  s.se = s.sd / std::sqrt(static_cast<double>(values.size()));
  return s;
}

std::vector<double> SweepResult::keys(const std::string& series) const {
  std::vector<double> out;
  for (const auto& row : trials) {
    if (row.series != series) continue;
    if (std::none_of(out.begin(), out.end(), [&row](double k) { return same_key(k, row.key); })) {
      out.push_back(row.key);
    }
  }
  return out;
}

LogLogFit fit_loglog_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw DomainError("log-log fit needs at least three points");
  double sx = 0.0, sy = 0.0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw DomainError("log-log fit needs positive values");
    sx += std::log(x);
    sy += std::log(y);
  }
  const double count = static_cast<double>(points.size());
  const double mx = sx / count;
  const double my = sy / count;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : points) {
    const double dx = std::log(x) - mx;
    const double dy = std::log(y) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw DomainError("log-log fit needs at least two distinct x values");
  const double slope = sxy / sxx;
  const double ss_res = syy - slope * sxy;
  const double r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return {slope, my - slope * mx, r2};
}

std::size_t oracle_tune(std::span<const TuningCandidate> candidates) {
  if (candidates.empty()) throw DomainError("oracle tuning needs at least one candidate");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& b = candidates[best];
    if (std::isnan(c.target_mse)) continue;
    const bool better =
        std::isnan(b.target_mse) || c.target_mse < b.target_mse ||
        (c.target_mse == b.target_mse &&
         (c.lambda < b.lambda || (c.lambda == b.lambda && c.b_dim < b.b_dim)));
    if (better) best = i;
  }
  return best;
}

double target_mse(const RealFunction& f, const TargetFunction& truth,
                  const DensityModel& target_law, const Quadrature& quad) {
  double sum = 0.0;
  for (std::size_t i = 0; i < quad.size(); ++i) {
    const double x = quad.nodes[i];
    const double q = target_law.pdf(x);
    if (q == 0.0) continue;
    const double h = f(x) - truth(x);
    sum += quad.weights[i] * h * h * q;
  }
  return sum;
}

std::size_t oracle_tune(std::span<const Predictor> candidates, const TargetFunction& truth,
                        const DensityModel& target_law, const Quadrature& quad) {
  std::vector<TuningCandidate> scored;
  scored.reserve(candidates.size());
  for (const auto& c : candidates) {
    scored.push_back({c.lambda, c.b_dim, target_mse(c.f, truth, target_law, quad)});
  }
  return oracle_tune(scored);
}

int rate_dimension(double effective_size, double smoothness) {
  const double d = std::round(std::pow(effective_size, 1.0 / (2.0 * smoothness + 1.0)));
  return std::max(1, static_cast<int>(d));
}

TargetFunction sine_series_truth(double smoothness, int terms) {
  if (terms < 1) throw DomainError("sine series needs at least one term");
  std::vector<double> theta(static_cast<std::size_t>(terms));
  for (int k = 1; k <= terms; ++k) {
    const double sign = k % 2 == 1 ? 1.0 : -1.0;
    theta[static_cast<std::size_t>(k - 1)] = sign * std::pow(k, -(smoothness + 0.5));
  }
  std::ostringstream os;
  os << "sine series, beta = " << smoothness << ", " << terms << " terms";
  return TargetFunction{[theta](double x) {
                          // sin((k+1)a) = 2 cos(a) sin(ka) - sin((k-1)a)
                          const double a = std::numbers::pi * x;
                          const double two_cos = 2.0 * std::cos(a);
                          double prev = 0.0;
                          double cur = std::sin(a);
                          double sum = 0.0;
                          for (double t : theta) {
                            sum += t * cur;
                            const double next = two_cos * cur - prev;
                            prev = cur;
                            cur = next;
                          }
                          return std::numbers::sqrt2 * sum;
                        },
                        os.str()};
}

std::string tilt_series(int d_f, int d_b) {
  return "TILT[d_f=" + std::to_string(d_f) + ",d_b=" + std::to_string(d_b) + "]";
}

std::string erm_series(int d_f) { return "SourceERM[d_f=" + std::to_string(d_f) + "]"; }

std::string rate_series(Method method, int n) {
  return to_string(method) + "[n=" + std::to_string(n) + "]";
}

}  // namespace tilt
