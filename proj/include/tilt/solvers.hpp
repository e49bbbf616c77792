#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tilt/features.hpp"
#include "tilt/population.hpp"
#include "tilt/rng.hpp"

namespace tilt {

/// Labeled source draws (x_i, y_i).
struct LabeledSample {
  std::vector<double> xs;
  std::vector<double> ys;

  std::size_t n() const noexcept { return xs.size(); }
  /// Throws DataError on size mismatch, emptiness or non-finite entries.
  void validate() const;
};

/// Unlabeled target covariates.
struct UnlabeledSample {
  std::vector<double> xs;

  std::size_t m() const noexcept { return xs.size(); }
  void validate() const;
};

struct TiltConfig {
  double lambda = 1.0;
  double ridge_f = 1e-8;
  double ridge_b = 1e-8;
};

struct TiltFit {
  Eigen::VectorXd theta;  ///< coefficients of the deployed predictor f
  Eigen::VectorXd gamma;  ///< coefficients of the auxiliary component b
  double source_objective = 0.0;  ///< joint objective at (theta, gamma)
  double condition_estimate = 0.0;  ///< reciprocal of the Cholesky rcond estimate
};

/// Joint objective
///   (1/n) sum_i (phi_f theta + phi_b gamma - y)_i^2 + (lambda/m) sum_j (phi~_b gamma)_j^2
///   + ridge_f |theta|^2 + ridge_b |gamma|^2
/// with the design matrices assembled once, so a lambda grid only re-solves
/// the (dim F + dim B) normal equations.
class TiltProblem {
 public:
  TiltProblem(const LabeledSample& src, const UnlabeledSample& tgt, const FeatureMap& fmap,
              const FeatureMap& bmap);

  TiltFit solve(const TiltConfig& cfg) const;
  double objective(const TiltConfig& cfg, const Eigen::VectorXd& theta,
                   const Eigen::VectorXd& gamma) const;

  int dim_f() const noexcept { return static_cast<int>(src_f_.cols()); }
  int dim_b() const noexcept { return static_cast<int>(src_b_.cols()); }

 private:
  Eigen::MatrixXd src_f_;  // n x dim F
  Eigen::MatrixXd src_b_;  // n x dim B
  Eigen::MatrixXd tgt_b_;  // m x dim B
  Eigen::VectorXd y_;
  // Scaled Gram blocks and cross products.
  Eigen::MatrixXd a_ff_, a_fb_, a_bb_, b_bb_;
  Eigen::VectorXd c_f_, c_b_;
};

/// Unique minimizer of the joint objective; bmap = Zero gives ridge source ERM.
TiltFit tilt_fit(const LabeledSample& src, const UnlabeledSample& tgt, const FeatureMap& fmap,
                 const FeatureMap& bmap, const TiltConfig& cfg);

/// Minimizes (1/n) sum_i w_i (phi(x_i)^T theta - y_i)^2 + ridge |theta|^2.
Eigen::VectorXd weighted_ridge_fit(const LabeledSample& src, const FeatureMap& fmap,
                                   std::span<const double> weights, double ridge);
/// Same, over a precomputed design matrix.
Eigen::VectorXd weighted_ridge_fit(const Eigen::MatrixXd& design, std::span<const double> ys,
                                   std::span<const double> weights, double ridge);

/// q(x_i) / p(x_i), unnormalized and unclipped.
std::vector<double> exact_ratio_weights(const DensityModel& p, const DensityModel& q,
                                        std::span<const double> xs);
std::vector<double> exact_ratio_weights(const PopulationContext& ctx, std::span<const double> xs);

/// q / (p + lambda q) at each x; lambda = 0 is accepted and gives q / p.
std::vector<double> exact_relative_weights(const DensityModel& p, const DensityModel& q,
                                          double lambda, std::span<const double> xs);
std::vector<double> exact_relative_weights(const PopulationContext& ctx,
                                          std::span<const double> xs);

/// Gaussian-kernel model of the relative ratio q / (alpha q + (1 - alpha) p),
/// clamped at zero.
///
/// With alpha = lambda / (1 + lambda) this estimates (1 + lambda) times
/// q / (p + lambda q); the constant factor does not change a weighted
/// least-squares fit without ridge.
class KernelRatioEstimator {
 public:
  KernelRatioEstimator(std::vector<double> centers, double bandwidth, Eigen::VectorXd coeffs,
                       double alpha, double ridge);

  double operator()(double x) const;
  std::vector<double> operator()(std::span<const double> xs) const;

  const std::vector<double>& centers() const noexcept { return centers_; }
  double bandwidth() const noexcept { return bandwidth_; }
  const Eigen::VectorXd& coefficients() const noexcept { return coeffs_; }
  double alpha() const noexcept { return alpha_; }
  double ridge() const noexcept { return ridge_; }

 private:
  std::vector<double> centers_;
  double bandwidth_;
  Eigen::VectorXd coeffs_;
  double alpha_;
  double ridge_;
};

/// Relative uLSIF: minimizes 1/2 beta^T H beta - h^T beta + ridge |beta|^2 / 2 with
/// H = alpha * mean_tgt k k^T + (1 - alpha) * mean_src k k^T and h = mean_tgt k.
KernelRatioEstimator kernel_relative_ratio_fit(std::span<const double> src_xs,
                                               std::span<const double> tgt_xs, double alpha,
                                               std::vector<double> centers, double bandwidth,
                                               double ridge);

struct KernelRatioOptions {
  std::size_t max_centers = 100;
  std::vector<double> ridge_grid{1e-3, 1e-2, 1e-1};
  int folds = 5;
};

/// Default protocol: up to `max_centers` target points as centers (seeded
/// subsample), median-heuristic bandwidth on the pooled sample, ridge by
/// k-fold cross-validation of the held-out uLSIF objective.
KernelRatioEstimator kernel_relative_ratio_fit_auto(std::span<const double> src_xs,
                                                    std::span<const double> tgt_xs, double alpha,
                                                    Rng& rng, const KernelRatioOptions& opts = {});

/// Median pairwise distance of the pooled sample (subsampled to at most
/// `max_points` points by stride).
double median_heuristic_bandwidth(std::span<const double> a, std::span<const double> b,
                                  std::size_t max_points = 1000);

}  // namespace tilt
