#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tilt {

/// Deterministic feature maps on [0,1] spanning the linear classes F and B.
class FeatureMap {
 public:
  enum class Family { ShiftedLegendre, Sine, Fourier, GaussianRBF, Zero };

  /// Zero map by default.
  FeatureMap() = default;

  /// sqrt(2k+1) P_k(2x-1) for k = 0..degree; orthonormal under Unif[0,1].
  static FeatureMap shifted_legendre(int degree);
  /// sqrt(2) sin(pi k x) for k = 1..num_frequencies.
  static FeatureMap sine(int num_frequencies);
  /// {1, sqrt2 cos 2pi x, sqrt2 sin 2pi x, sqrt2 cos 4pi x, ...} truncated to `dimension`.
  static FeatureMap fourier(int dimension);
  /// exp(-(x - c_j)^2 / (2 bandwidth^2)).
  static FeatureMap gaussian_rbf(std::vector<double> centers, double bandwidth);
  /// `count` equally spaced centers on [0,1].
  static FeatureMap gaussian_rbf_uniform(int count, double bandwidth);
  static FeatureMap zero();

  Family family() const noexcept { return family_; }
  int output_dim() const noexcept { return dim_; }
  const std::vector<double>& centers() const noexcept { return centers_; }
  double bandwidth() const noexcept { return bandwidth_; }

  /// Writes output_dim() values into `out`.
  void featurize_into(double x, std::span<double> out) const;
  Eigen::VectorXd featurize(double x) const;
  Eigen::MatrixXd design_matrix(std::span<const double> xs) const;

  std::string describe() const;

 private:
  FeatureMap(Family family, int dim) : family_(family), dim_(dim) {}

  Family family_ = Family::Zero;
  int dim_ = 0;
  std::vector<double> centers_;
  double bandwidth_ = 0.0;
};

inline Eigen::VectorXd featurize(const FeatureMap& map, double x) { return map.featurize(x); }

inline Eigen::MatrixXd design_matrix(const FeatureMap& map, std::span<const double> xs) {
  return map.design_matrix(xs);
}

/// Evaluates sum_j coeffs_j phi_j(x).
double evaluate_expansion(const FeatureMap& map, const Eigen::VectorXd& coeffs, double x);

}  // namespace tilt
