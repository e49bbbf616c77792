#pragma once

#include <functional>
#include <string>

#include "tilt/densities.hpp"
#include "tilt/features.hpp"
#include "tilt/quadrature.hpp"

namespace tilt {

using RealFunction = std::function<double(double)>;

/// The regression function f*(x) = E[Y | X = x].
struct TargetFunction {
  RealFunction eval;
  std::string description;

  double operator()(double x) const { return eval(x); }
};

/// Source density p, target density q and penalty lambda, with the
/// quadrature rule used for every population functional.
///
/// Atoms are rejected: the population functionals are defined for densities.
class PopulationContext {
 public:
  static constexpr int kDefaultTrapezoidPoints = 20001;
  static constexpr int kDefaultGaussPoints = 512;

  PopulationContext(DensityModel p, DensityModel q, double lambda,
                    int quad_points = kDefaultTrapezoidPoints,
                    QuadRule quad_rule = QuadRule::Trapezoid);

  const DensityModel& p() const noexcept { return p_; }
  const DensityModel& q() const noexcept { return q_; }
  double lambda() const noexcept { return lambda_; }
  int quad_points() const noexcept { return quad_points_; }
  QuadRule quad_rule() const noexcept { return quad_rule_; }
  const Quadrature& quadrature() const noexcept { return quad_; }

  PopulationContext with_lambda(double lambda) const;

  /// p and q at every quadrature node, cached at construction.
  struct NodeDensities {
    std::vector<double> p, q;
  };
  const NodeDensities& node_densities() const noexcept { return node_densities_; }

 private:
  DensityModel p_;
  DensityModel q_;
  double lambda_;
  int quad_points_;
  QuadRule quad_rule_;
  Quadrature quad_;
  NodeDensities node_densities_;
};

/// v(x) = p / (p + lambda q), in [0,1].
double v_weight(const PopulationContext& ctx, double x);
/// w(x) = q / (p + lambda q), in [0, 1/lambda].
double w_weight(const PopulationContext& ctx, double x);

/// b*_f(x) = -v(x) (f(x) - f*(x)).
double optimal_offset(const PopulationContext& ctx, const RealFunction& f,
                      const TargetFunction& fstar, double x);

/// E_Q[v (f - f*)^2].
double err_lambda_sq(const PopulationContext& ctx, const RealFunction& f,
                     const TargetFunction& fstar);

/// E_Q[(f - f*)^2], the unweighted target excess risk.
double target_excess_risk(const PopulationContext& ctx, const RealFunction& f,
                          const TargetFunction& fstar);

/// ||f + b - f*||_P^2 + lambda ||b||_Q^2.
double auxiliary_excess_risk(const PopulationContext& ctx, const RealFunction& f,
                             const RealFunction& b, const TargetFunction& fstar);

struct DecompositionReport {
  double lhs;            ///< auxiliary excess risk
  double rhs;            ///< lambda Err^2 + (1 + lambda) ||b - b*||^2 under S_lambda
  double abs_gap;
  double rel_gap;
  double err_lambda_sq;  ///< Err^2 term
  double offset_gap_sq;  ///< ||b - b*||^2 under the density (p + lambda q) / (1 + lambda)
};

/// Evaluates both sides of
///   Rbar(f, b) = lambda Err^2(f) + (1 + lambda) ||b - b*_f||^2_{S_lambda}
/// with the context's quadrature rule.
DecompositionReport verify_decomposition(const PopulationContext& ctx, const RealFunction& f,
                                         const RealFunction& b, const TargetFunction& fstar);

/// min over b in span(bmap) of Rbar(f, b) / lambda, solved by weighted least
/// squares on the quadrature nodes.
double profiled_risk_in_span(const PopulationContext& ctx, const RealFunction& f,
                             const TargetFunction& fstar, const FeatureMap& bmap);

}  // namespace tilt
