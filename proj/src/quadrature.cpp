#include "tilt/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "tilt/errors.hpp"

namespace tilt {

Quadrature Quadrature::trapezoid(int points) {
  if (points < 2) throw DomainError("trapezoid rule needs at least two points");
  Quadrature q;
  q.nodes.resize(static_cast<std::size_t>(points));
  q.weights.assign(static_cast<std::size_t>(points), 1.0 / (points - 1));
  for (int i = 0; i < points; ++i) {
    q.nodes[static_cast<std::size_t>(i)] = static_cast<double>(i) / (points - 1);
  }
  q.nodes.back() = 1.0;
  q.weights.front() *= 0.5;
  q.weights.back() *= 0.5;
  return q;
}

Quadrature Quadrature::gauss_legendre(int points) {
  if (points < 1) throw DomainError("Gauss-Legendre rule needs at least one node");
  // {P_n(t), P_n'(t)} by the three-term recurrence.
  auto legendre = [points](double t) {
    double p0 = 1.0;
    double p1 = t;
    for (int k = 2; k <= points; ++k) {
      const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const double dp = points * (t * p1 - p0) / (t * t - 1.0);
    return std::pair{p1, dp};
  };

  Quadrature q;
  const auto n = static_cast<std::size_t>(points);
  q.nodes.resize(n);
  q.weights.resize(n);
  // Nodes are symmetric about 0; Newton from the asymptotic initial guess.
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (points + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [p, dp] = legendre(t);
      const double step = p / dp;
      t -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double dp = legendre(t).second;
    const double w = 2.0 / ((1.0 - t * t) * dp * dp);
    q.nodes[i] = 0.5 * (1.0 - t);
    q.nodes[n - 1 - i] = 0.5 * (1.0 + t);
    q.weights[i] = 0.5 * w;
    q.weights[n - 1 - i] = 0.5 * w;
  }
  return q;
}

Quadrature Quadrature::make(QuadRule rule, int points) {
  return rule == QuadRule::Trapezoid ? trapezoid(points) : gauss_legendre(points);
}

double Quadrature::integrate(const std::function<double(double)>& g) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) sum += weights[i] * g(nodes[i]);
  return sum;
}

}  // namespace tilt
