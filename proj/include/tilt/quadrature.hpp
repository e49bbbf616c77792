#pragma once

#include <functional>
#include <vector>

namespace tilt {

enum class QuadRule { Trapezoid, GaussLegendre };

/// Nodes and weights of a quadrature rule on [0,1].
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;

  /// Composite trapezoid on `points` equally spaced nodes including both ends.
  static Quadrature trapezoid(int points);
  /// Gauss-Legendre with `points` nodes, mapped to [0,1].
  static Quadrature gauss_legendre(int points);
  static Quadrature make(QuadRule rule, int points);

  double integrate(const std::function<double(double)>& g) const;
  std::size_t size() const noexcept { return nodes.size(); }
};

}  // namespace tilt
