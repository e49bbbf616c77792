#pragma once

#include <vector>

#include <Eigen/Dense>

namespace tilt {

/// Legendre-type generator psi together with its conjugate psi*.
///
/// LogSumExp natural parameters are defined up to a constant shift; the
/// conjugate gradient returns the normalized representative log(mu), whose
/// log-partition is zero.
class Generator {
 public:
  enum class Kind { Quadratic, LogSumExp };

  /// psi(z) = |z|^2 / 2 on R^dim.
  static Generator quadratic(int dim);
  /// psi(z) = log sum_k exp(z_k) on R^K, K >= 2.
  static Generator log_sum_exp(int num_classes);

  Kind kind() const noexcept { return kind_; }
  int dim() const noexcept { return dim_; }

  double psi(const Eigen::VectorXd& z) const;
  /// Identity or softmax.
  Eigen::VectorXd grad_psi(const Eigen::VectorXd& z) const;
  /// |u|^2 / 2, or negative entropy sum u log u on the simplex.
  double psi_conj(const Eigen::VectorXd& u) const;
  /// Inverse of grad_psi; log(u) for LogSumExp (u strictly positive).
  Eigen::VectorXd grad_psi_conj(const Eigen::VectorXd& u) const;

 private:
  Generator(Kind kind, int dim) : kind_(kind), dim_(dim) {}
  void check_dim(const Eigen::VectorXd& z) const;

  Kind kind_;
  int dim_;
};

/// A probability vector; entries >= 0 summing to 1 within 1e-12.
class SimplexPoint {
 public:
  explicit SimplexPoint(Eigen::VectorXd probs);
  const Eigen::VectorXd& probs() const noexcept { return probs_; }
  bool strictly_positive() const noexcept { return (probs_.array() > 0.0).all(); }

 private:
  Eigen::VectorXd probs_;
};

/// D_psi(u, v) = psi(u) - psi(v) - <grad psi(v), u - v> in natural coordinates.
double bregman_div(const Generator& gen, const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// D_{psi*}(u, v) in mean coordinates; KL(u || v) for LogSumExp.
double conjugate_bregman_div(const Generator& gen, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& v);

/// J^eta(u, v) = eta psi(u) + (1 - eta) psi(v) - psi(eta u + (1 - eta) v).
double weighted_jensen(const Generator& gen, double eta, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& v);

struct BregmanTiltTerms {
  double risk_integrand;
  double jensen_term;
  double residual_term;
};

/// Pointwise Bregman-TILT risk and its split into a Jensen term and a
/// residual term, at a point where v = p / (p + lambda q) and
/// rho = p + lambda q.
BregmanTiltTerms bregman_tilt_risk_pointwise(const Generator& gen, double v_lambda_x,
                                             double rho_lambda_x,
                                             const Eigen::VectorXd& mu_corrected,
                                             const Eigen::VectorXd& mu_star,
                                             const Eigen::VectorXd& mu_f);

/// Mean parameter whose conjugate gradient is the barycenter
/// v theta* + (1 - v) theta_f: the pointwise minimizer over corrections.
Eigen::VectorXd optimal_corrected_mean(const Generator& gen, double v_lambda_x,
                                       const Eigen::VectorXd& mu_star,
                                       const Eigen::VectorXd& mu_f);

/// -log sum_k rho_k^v mu_k^(1 - v).
double kl_tilt_profiled_integrand(const SimplexPoint& rho, const SimplexPoint& mu_f, double v);

struct LimitRatio {
  double lambda;
  double ratio;      ///< NaN when exact_match
  bool exact_match;  ///< theta_f equals theta* so both sides vanish
};

/// [(p + lambda q) J^{v_lambda}(theta*, theta_f)] / [lambda q D_psi(theta_f, theta*)]
/// for each lambda.
std::vector<LimitRatio> small_lambda_limit_check(const Generator& gen, double p_x, double q_x,
                                                 const Eigen::VectorXd& theta_star,
                                                 const Eigen::VectorXd& theta_f,
                                                 const std::vector<double>& lambdas);

struct KlTiltSurrogateValue {
  double source_term;
  double target_term;
  double total;
};

/// Empirical KL-TILT surrogate over logit arrays (one row per sample):
///   (T^2/n) sum_i KL(pi_T(f + b) || pi_T(tau)) + (lambda T^2/m) sum_j KL(pi_T(f + b) || pi_T(f)).
KlTiltSurrogateValue kl_tilt_surrogate(const Eigen::MatrixXd& f_src, const Eigen::MatrixXd& b_src,
                                       const Eigen::MatrixXd& teacher_src,
                                       const Eigen::MatrixXd& f_tgt, const Eigen::MatrixXd& b_tgt,
                                       double lambda, double temperature = 2.0);

Eigen::VectorXd softmax(const Eigen::VectorXd& z);
double log_sum_exp(const Eigen::VectorXd& z);
/// KL(u || v); v must be strictly positive where u is.
double kl_divergence(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

}  // namespace tilt
