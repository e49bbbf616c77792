#include "tilt/bregman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tilt/errors.hpp"

namespace tilt {
namespace {

constexpr double kSimplexTol = 1e-12;

void check_simplex(const Eigen::VectorXd& u, bool strict, const char* what) {
  if (!u.allFinite()) throw DomainError(std::string(what) + ": non-finite entries");
  if ((u.array() < 0.0).any()) throw DomainError(std::string(what) + ": negative probability");
  if (strict && (u.array() <= 0.0).any()) {
    throw DomainError(std::string(what) + ": zero probability where a positive one is required");
  }
  if (std::abs(u.sum() - 1.0) > kSimplexTol) {
    throw DomainError(std::string(what) + ": probabilities do not sum to 1");
  }
}

void check_pair(const Generator& gen, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != gen.dim() || v.size() != gen.dim()) {
    throw DomainError("vector length does not match the generator");
  }
}

}  // namespace

double log_sum_exp(const Eigen::VectorXd& z) {
  const double top = z.maxCoeff();
  return top + std::log((z.array() - top).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const Eigen::ArrayXd e = (z.array() - z.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

double kl_divergence(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) throw DomainError("KL arguments differ in length");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    if (u(k) == 0.0) continue;
    if (!(v(k) > 0.0)) throw DomainError("KL(u||v) is infinite: v has a zero where u does not");
    sum += u(k) * std::log(u(k) / v(k));
  }
  return sum;
}

Generator Generator::quadratic(int dim) {
  if (dim < 1) throw DomainError("quadratic generator needs dim >= 1");
  return Generator(Kind::Quadratic, dim);
}

Generator Generator::log_sum_exp(int num_classes) {
  if (num_classes < 2) throw DomainError("log-sum-exp generator needs K >= 2");
  return Generator(Kind::LogSumExp, num_classes);
}

void Generator::check_dim(const Eigen::VectorXd& z) const {
  if (z.size() != dim_) throw DomainError("vector length does not match the generator");
}

double Generator::psi(const Eigen::VectorXd& z) const {
  check_dim(z);
  return kind_ == Kind::Quadratic ? 0.5 * z.squaredNorm() : tilt::log_sum_exp(z);
}

Eigen::VectorXd Generator::grad_psi(const Eigen::VectorXd& z) const {
  check_dim(z);
  return kind_ == Kind::Quadratic ? z : softmax(z);
}

double Generator::psi_conj(const Eigen::VectorXd& u) const {
  check_dim(u);
  if (kind_ == Kind::Quadratic) return 0.5 * u.squaredNorm();
  check_simplex(u, false, "negative entropy");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    if (u(k) > 0.0) sum += u(k) * std::log(u(k));
  }
  return sum;
}

Eigen::VectorXd Generator::grad_psi_conj(const Eigen::VectorXd& u) const {
  check_dim(u);
  if (kind_ == Kind::Quadratic) return u;
  check_simplex(u, true, "conjugate gradient");
  return u.array().log().matrix();
}

SimplexPoint::SimplexPoint(Eigen::VectorXd probs) : probs_(std::move(probs)) {
  if (probs_.size() < 1) throw DomainError("simplex point must be nonempty");
  check_simplex(probs_, false, "simplex point");
}

double bregman_div(const Generator& gen, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  check_pair(gen, u, v);
  if (gen.kind() == Generator::Kind::Quadratic) return 0.5 * (u - v).squaredNorm();
  return gen.psi(u) - gen.psi(v) - gen.grad_psi(v).dot(u - v);
}

double conjugate_bregman_div(const Generator& gen, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& v) {
  check_pair(gen, u, v);
  if (gen.kind() == Generator::Kind::Quadratic) return 0.5 * (u - v).squaredNorm();
  check_simplex(u, false, "KL first argument");
  check_simplex(v, false, "KL second argument");
  return kl_divergence(u, v);
}

double weighted_jensen(const Generator& gen, double eta, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& v) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("Jensen weight must lie in [0,1]");
  check_pair(gen, u, v);
  if (eta == 0.0 || eta == 1.0) return 0.0;
  return eta * gen.psi(u) + (1.0 - eta) * gen.psi(v) - gen.psi(eta * u + (1.0 - eta) * v);
}

BregmanTiltTerms bregman_tilt_risk_pointwise(const Generator& gen, double v_lambda_x,
                                             double rho_lambda_x,
                                             const Eigen::VectorXd& mu_corrected,
                                             const Eigen::VectorXd& mu_star,
                                             const Eigen::VectorXd& mu_f) {
  if (!(v_lambda_x >= 0.0 && v_lambda_x <= 1.0)) throw DomainError("v_lambda must lie in [0,1]");
  if (!(rho_lambda_x > 0.0)) throw DomainError("rho_lambda must be positive");
  // p = v rho and lambda q = (1 - v) rho.
  const double p = v_lambda_x * rho_lambda_x;
  const double lambda_q = (1.0 - v_lambda_x) * rho_lambda_x;

  const Eigen::VectorXd theta_star = gen.grad_psi_conj(mu_star);
  const Eigen::VectorXd theta_f = gen.grad_psi_conj(mu_f);
  const Eigen::VectorXd z = gen.grad_psi_conj(mu_corrected);
  const Eigen::VectorXd barycenter = v_lambda_x * theta_star + (1.0 - v_lambda_x) * theta_f;

  BregmanTiltTerms out{};
  out.risk_integrand = p * conjugate_bregman_div(gen, mu_corrected, mu_star) +
                       lambda_q * conjugate_bregman_div(gen, mu_corrected, mu_f);
  out.jensen_term = rho_lambda_x * weighted_jensen(gen, v_lambda_x, theta_star, theta_f);
  out.residual_term = rho_lambda_x * bregman_div(gen, barycenter, z);
  return out;
}

Eigen::VectorXd optimal_corrected_mean(const Generator& gen, double v_lambda_x,
                                       const Eigen::VectorXd& mu_star,
                                       const Eigen::VectorXd& mu_f) {
  const Eigen::VectorXd barycenter =
      v_lambda_x * gen.grad_psi_conj(mu_star) + (1.0 - v_lambda_x) * gen.grad_psi_conj(mu_f);
  return gen.grad_psi(barycenter);
}

double kl_tilt_profiled_integrand(const SimplexPoint& rho, const SimplexPoint& mu_f, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw DomainError("v must lie in [0,1]");
  if (rho.probs().size() != mu_f.probs().size()) throw DomainError("class counts differ");
  if (!rho.strictly_positive() || !mu_f.strictly_positive()) {
    throw DomainError("Chernoff discrepancy needs strictly positive probabilities");
  }
  if (v == 0.0 || v == 1.0) return 0.0;
  const Eigen::ArrayXd terms =
      (v * rho.probs().array().log() + (1.0 - v) * mu_f.probs().array().log()).exp();
  // Holder: the sum is <= 1; clamp rounding excursions above it.
  return std::max(0.0, -std::log(terms.sum()));
}

std::vector<LimitRatio> small_lambda_limit_check(const Generator& gen, double p_x, double q_x,
                                                 const Eigen::VectorXd& theta_star,
                                                 const Eigen::VectorXd& theta_f,
                                                 const std::vector<double>& lambdas) {
  if (!(p_x > 0.0) || !(q_x > 0.0)) throw DomainError("densities must be positive");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0)) throw DomainError("lambda values must be positive");
    if (i > 0 && !(lambdas[i] < lambdas[i - 1])) {
      throw DomainError("lambda values must be strictly decreasing");
    }
  }
  const double divergence = bregman_div(gen, theta_f, theta_star);
  std::vector<LimitRatio> out;
  out.reserve(lambdas.size());
  for (double lambda : lambdas) {
    if (divergence == 0.0) {
      out.push_back({lambda, std::numeric_limits<double>::quiet_NaN(), true});
      continue;
    }
    const double rho = p_x + lambda * q_x;
    const double v = p_x / rho;
    const double numerator = rho * weighted_jensen(gen, v, theta_star, theta_f);
    out.push_back({lambda, numerator / (lambda * q_x * divergence), false});
  }
  return out;
}

KlTiltSurrogateValue kl_tilt_surrogate(const Eigen::MatrixXd& f_src, const Eigen::MatrixXd& b_src,
                                       const Eigen::MatrixXd& teacher_src,
                                       const Eigen::MatrixXd& f_tgt, const Eigen::MatrixXd& b_tgt,
                                       double lambda, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("temperature must be positive");
  if (!(lambda >= 0.0)) throw DomainError("lambda must be nonnegative");
  if (f_src.rows() == 0 || f_tgt.rows() == 0) throw DataError("empty logit arrays");
  const Eigen::Index k = f_src.cols();
  if (b_src.rows() != f_src.rows() || teacher_src.rows() != f_src.rows() ||
      b_tgt.rows() != f_tgt.rows() || b_src.cols() != k || teacher_src.cols() != k ||
      f_tgt.cols() != k || b_tgt.cols() != k) {
    throw DataError("logit array shapes do not match");
  }
  const double t2 = temperature * temperature;
  const double inv_t = 1.0 / temperature;

  double source = 0.0;
  for (Eigen::Index i = 0; i < f_src.rows(); ++i) {
    const Eigen::VectorXd corrected = softmax(inv_t * (f_src.row(i) + b_src.row(i)).transpose());
    const Eigen::VectorXd teacher = softmax(inv_t * teacher_src.row(i).transpose());
    source += kl_divergence(corrected, teacher);
  }
  double target = 0.0;
  for (Eigen::Index j = 0; j < f_tgt.rows(); ++j) {
    const Eigen::VectorXd corrected = softmax(inv_t * (f_tgt.row(j) + b_tgt.row(j)).transpose());
    const Eigen::VectorXd base = softmax(inv_t * f_tgt.row(j).transpose());
    target += kl_divergence(corrected, base);
  }
  KlTiltSurrogateValue out{};
  out.source_term = t2 * source / static_cast<double>(f_src.rows());
  out.target_term = lambda * t2 * target / static_cast<double>(f_tgt.rows());
  out.total = out.source_term + out.target_term;
  return out;
}

}  // namespace tilt
