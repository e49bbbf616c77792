#include "tilt/population.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tilt/errors.hpp"

namespace tilt {
namespace {

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string("non-finite value in ") + what);
  }
}

}  // namespace

PopulationContext::PopulationContext(DensityModel p, DensityModel q, double lambda,
                                     int quad_points, QuadRule quad_rule)
    : p_(std::move(p)),
      q_(std::move(q)),
      lambda_(lambda),
      quad_points_(quad_points),
      quad_rule_(quad_rule) {
  if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) {
    throw ConfigError("lambda", "must be positive and finite");
  }
  if (p_.has_atoms() || q_.has_atoms()) {
    throw ConfigError("population", "population functionals require densities without atoms");
  }
  if (quad_rule_ == QuadRule::Trapezoid && (quad_points_ < 3 || quad_points_ % 2 == 0)) {
    throw ConfigError("quad_points", "trapezoid rule needs an odd number of points >= 3");
  }
  if (quad_rule_ == QuadRule::GaussLegendre && quad_points_ < 1) {
    throw ConfigError("quad_points", "must be positive");
  }
  quad_ = Quadrature::make(quad_rule_, quad_points_);
  node_densities_.p.reserve(quad_.size());
  node_densities_.q.reserve(quad_.size());
  for (double x : quad_.nodes) {
    node_densities_.p.push_back(p_.pdf(x));
    node_densities_.q.push_back(q_.pdf(x));
  }
}

PopulationContext PopulationContext::with_lambda(double lambda) const {
  PopulationContext copy = *this;
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("lambda", "must be positive and finite");
  }
  copy.lambda_ = lambda;
  return copy;
}

double v_weight(const PopulationContext& ctx, double x) {
  const double p = ctx.p().pdf(x);
  const double mix = p + ctx.lambda() * ctx.q().pdf(x);
  if (!(mix > 0.0)) {
    std::ostringstream os;
    os << "v_lambda undefined at x = " << x << ": both densities vanish";
    throw DomainError(os.str());
  }
  return p / mix;
}

double w_weight(const PopulationContext& ctx, double x) {
  const double q = ctx.q().pdf(x);
  const double mix = ctx.p().pdf(x) + ctx.lambda() * q;
  if (!(mix > 0.0)) {
    std::ostringstream os;
    os << "w_lambda undefined at x = " << x << ": both densities vanish";
    throw DomainError(os.str());
  }
  return q / mix;
}

double optimal_offset(const PopulationContext& ctx, const RealFunction& f,
                      const TargetFunction& fstar, double x) {
  return -v_weight(ctx, x) * (f(x) - fstar(x));
}

// Quadrature nodes where p + lambda q = 0 carry no mass in any of the
// functionals below and are skipped.

double err_lambda_sq(const PopulationContext& ctx, const RealFunction& f,
                     const TargetFunction& fstar) {
  const auto& quad = ctx.quadrature();
  const auto& dens = ctx.node_densities();
  const double lambda = ctx.lambda();
  double sum = 0.0;
  for (std::size_t i = 0; i < quad.size(); ++i) {
    const double p = dens.p[i];
    const double q = dens.q[i];
    if (q == 0.0) continue;
    const double x = quad.nodes[i];
    const double h = f(x) - fstar(x);
    sum += quad.weights[i] * (p / (p + lambda * q)) * h * h * q;
  }
  require_finite(sum, "err_lambda_sq");
  return sum;
}

double target_excess_risk(const PopulationContext& ctx, const RealFunction& f,
                          const TargetFunction& fstar) {
  const auto& quad = ctx.quadrature();
  const auto& dens = ctx.node_densities();
  double sum = 0.0;
  for (std::size_t i = 0; i < quad.size(); ++i) {
    if (dens.q[i] == 0.0) continue;
    const double x = quad.nodes[i];
    const double h = f(x) - fstar(x);
    sum += quad.weights[i] * h * h * dens.q[i];
  }
  require_finite(sum, "target_excess_risk");
  return sum;
}

double auxiliary_excess_risk(const PopulationContext& ctx, const RealFunction& f,
                             const RealFunction& b, const TargetFunction& fstar) {
  const auto& quad = ctx.quadrature();
  const auto& dens = ctx.node_densities();
  const double lambda = ctx.lambda();
  double sum = 0.0;
  for (std::size_t i = 0; i < quad.size(); ++i) {
    const double p = dens.p[i];
    const double q = dens.q[i];
    if (p == 0.0 && q == 0.0) continue;
    const double x = quad.nodes[i];
    const double bx = b(x);
    const double r = f(x) + bx - fstar(x);
    sum += quad.weights[i] * (r * r * p + lambda * bx * bx * q);
  }
  require_finite(sum, "auxiliary_excess_risk");
  return sum;
}

DecompositionReport verify_decomposition(const PopulationContext& ctx, const RealFunction& f,
                                         const RealFunction& b, const TargetFunction& fstar) {
  const auto& quad = ctx.quadrature();
  const auto& dens = ctx.node_densities();
  const double lambda = ctx.lambda();
  double lhs = 0.0;
  double err = 0.0;
  double offset_gap = 0.0;  // int (b - b*)^2 (p + lambda q) dx
  for (std::size_t i = 0; i < quad.size(); ++i) {
    const double p = dens.p[i];
    const double q = dens.q[i];
    const double mix = p + lambda * q;
    if (!(mix > 0.0)) continue;
    const double x = quad.nodes[i];
    const double w = quad.weights[i];
    const double fx = f(x);
    const double bx = b(x);
    const double h = fx - fstar(x);
    const double v = p / mix;
    const double r = h + bx;
    lhs += w * (r * r * p + lambda * bx * bx * q);
    err += w * v * h * h * q;
    const double d = bx + v * h;
    offset_gap += w * d * d * mix;
  }
  DecompositionReport report{};
  report.lhs = lhs;
  report.err_lambda_sq = err;
  // (1 + lambda) ||b - b*||^2_{S_lambda} = int (b - b*)^2 (p + lambda q).
  report.offset_gap_sq = offset_gap / (1.0 + lambda);
  report.rhs = lambda * err + offset_gap;
  report.abs_gap = std::abs(report.lhs - report.rhs);
  const double scale = std::max(std::abs(report.lhs), std::abs(report.rhs));
  report.rel_gap = scale > 0.0 ? report.abs_gap / scale : 0.0;
  require_finite(report.lhs, "verify_decomposition lhs");
  require_finite(report.rhs, "verify_decomposition rhs");
  return report;
}

double profiled_risk_in_span(const PopulationContext& ctx, const RealFunction& f,
                             const TargetFunction& fstar, const FeatureMap& bmap) {
  const auto& quad = ctx.quadrature();
  const auto& dens = ctx.node_densities();
  const double lambda = ctx.lambda();
  const auto rows = static_cast<Eigen::Index>(quad.size());
  const int dim = bmap.output_dim();

  // Rbar(f, b) = int (p + lambda q)(b + v h)^2 + lambda v h^2 q, so the best b
  // in the span is the weighted least-squares fit of -v h.
  Eigen::MatrixXd design(rows, dim);
  Eigen::VectorXd rhs(rows);
  Eigen::VectorXd h(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double x = quad.nodes[k];
    const double mix = dens.p[k] + lambda * dens.q[k];
    h(i) = f(x) - fstar(x);
    const double sw = std::sqrt(quad.weights[k] * mix);
    if (dim > 0) design.row(i) = sw * bmap.featurize(x).transpose();
    rhs(i) = mix > 0.0 ? -sw * (dens.p[k] / mix) * h(i) : 0.0;
  }
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(dim);
  if (dim > 0) gamma = design.colPivHouseholderQr().solve(rhs);

  double sum = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double bx = dim > 0 ? evaluate_expansion(bmap, gamma, quad.nodes[k]) : 0.0;
    const double r = h(i) + bx;
    sum += quad.weights[k] * (r * r * dens.p[k] + lambda * bx * bx * dens.q[k]);
  }
  require_finite(sum, "profiled_risk_in_span");
  return sum / lambda;
}

}  // namespace tilt
