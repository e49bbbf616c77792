#include "tilt/features.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "tilt/errors.hpp"

namespace tilt {

FeatureMap FeatureMap::shifted_legendre(int degree) {
  if (degree < 0) throw DomainError("Legendre degree must be nonnegative");
  return FeatureMap(Family::ShiftedLegendre, degree + 1);
}

FeatureMap FeatureMap::sine(int num_frequencies) {
  if (num_frequencies < 1) throw DomainError("sine family needs at least one frequency");
  return FeatureMap(Family::Sine, num_frequencies);
}

FeatureMap FeatureMap::fourier(int dimension) {
  if (dimension < 1) throw DomainError("Fourier dimension must be positive");
  return FeatureMap(Family::Fourier, dimension);
}

FeatureMap FeatureMap::gaussian_rbf(std::vector<double> centers, double bandwidth) {
  if (centers.empty()) throw DomainError("RBF family needs at least one center");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw DomainError("RBF bandwidth must be positive");
  }
  for (double c : centers) {
    if (!(c >= 0.0 && c <= 1.0)) throw DomainError("RBF centers must lie in [0,1]");
  }
  FeatureMap map(Family::GaussianRBF, static_cast<int>(centers.size()));
  map.centers_ = std::move(centers);
  map.bandwidth_ = bandwidth;
  return map;
}

FeatureMap FeatureMap::gaussian_rbf_uniform(int count, double bandwidth) {
  if (count < 1) throw DomainError("RBF family needs at least one center");
  std::vector<double> centers(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) {
    centers[static_cast<std::size_t>(j)] = count == 1 ? 0.5 : static_cast<double>(j) / (count - 1);
  }
  return gaussian_rbf(std::move(centers), bandwidth);
}

FeatureMap FeatureMap::zero() { return FeatureMap(Family::Zero, 0); }

void FeatureMap::featurize_into(double x, std::span<double> out) const {
  if (!(x >= 0.0 && x <= 1.0)) {
    std::ostringstream os;
    os << "feature input x = " << x << " is outside [0,1]";
    throw DomainError(os.str());
  }
  if (out.size() != static_cast<std::size_t>(dim_)) {
    throw DataError("feature output buffer has the wrong length");
  }
  constexpr double sqrt2 = std::numbers::sqrt2;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  switch (family_) {
    case Family::ShiftedLegendre: {
      // Bonnet recurrence on t = 2x - 1, then scale by sqrt(2k+1).
      const double t = 2.0 * x - 1.0;
      double prev = 1.0;
      double cur = t;
      out[0] = 1.0;
      if (dim_ > 1) out[1] = std::sqrt(3.0) * t;
      for (int k = 2; k < dim_; ++k) {
        const double next = ((2.0 * k - 1.0) * t * cur - (k - 1.0) * prev) / k;
        prev = cur;
        cur = next;
        out[static_cast<std::size_t>(k)] = std::sqrt(2.0 * k + 1.0) * cur;
      }
      break;
    }
    case Family::Sine:
      for (int k = 1; k <= dim_; ++k) {
        out[static_cast<std::size_t>(k - 1)] = sqrt2 * std::sin(std::numbers::pi * k * x);
      }
      break;
    case Family::Fourier:
      out[0] = 1.0;
      for (int j = 1; j < dim_; ++j) {
        const int freq = (j + 1) / 2;
        out[static_cast<std::size_t>(j)] =
            sqrt2 * (j % 2 == 1 ? std::cos(two_pi * freq * x) : std::sin(two_pi * freq * x));
      }
      break;
    case Family::GaussianRBF: {
      const double inv = 1.0 / (2.0 * bandwidth_ * bandwidth_);
      for (std::size_t j = 0; j < centers_.size(); ++j) {
        const double d = x - centers_[j];
        out[j] = std::exp(-d * d * inv);
      }
      break;
    }
    case Family::Zero:
      break;
  }
}

Eigen::VectorXd FeatureMap::featurize(double x) const {
  Eigen::VectorXd v(dim_);
  featurize_into(x, std::span<double>(v.data(), static_cast<std::size_t>(dim_)));
  return v;
}

Eigen::MatrixXd FeatureMap::design_matrix(std::span<const double> xs) const {
  // Row-major scratch keeps each featurize_into call contiguous.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(
      static_cast<Eigen::Index>(xs.size()), dim_);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    featurize_into(xs[i], std::span<double>(rows.row(static_cast<Eigen::Index>(i)).data(),
                                            static_cast<std::size_t>(dim_)));
  }
  return rows;
}

std::string FeatureMap::describe() const {
  std::ostringstream os;
  switch (family_) {
    case Family::ShiftedLegendre:
      os << "ShiftedLegendre(" << dim_ - 1 << ")";
      break;
    case Family::Sine:
      os << "Sine(" << dim_ << ")";
      break;
    case Family::Fourier:
      os << "Fourier(" << dim_ << ")";
      break;
    case Family::GaussianRBF:
      os << "GaussianRBF(" << dim_ << " centers, bandwidth " << bandwidth_ << ")";
      break;
    case Family::Zero:
      os << "Zero";
      break;
  }
  return os.str();
}

double evaluate_expansion(const FeatureMap& map, const Eigen::VectorXd& coeffs, double x) {
  if (coeffs.size() != map.output_dim()) throw DataError("coefficient length mismatch");
  if (map.output_dim() == 0) return 0.0;
  return map.featurize(x).dot(coeffs);
}

}  // namespace tilt
