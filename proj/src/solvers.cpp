#include "tilt/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tilt/errors.hpp"

namespace tilt {
namespace {

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError(std::string("non-finite entry in ") + what);
  }
}

struct SpdSolution {
  Eigen::VectorXd x;
  double rcond;
  bool ok;
};

// Solves K x = c for symmetric K by Cholesky after symmetric Jacobi scaling
// D K D with D = diag(K)^{-1/2}. `ok` is false if K is not numerically
// positive definite.
SpdSolution solve_spd(const Eigen::MatrixXd& k, const Eigen::VectorXd& c) {
  const Eigen::Index n = k.rows();
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double diag = k(i, i);
    if (!(diag > 0.0) || !std::isfinite(diag)) return {Eigen::VectorXd::Zero(n), 0.0, false};
    d(i) = 1.0 / std::sqrt(diag);
  }
  const Eigen::MatrixXd scaled = d.asDiagonal() * k * d.asDiagonal();
  Eigen::LLT<Eigen::MatrixXd> llt(scaled);
  if (llt.info() != Eigen::Success) return {Eigen::VectorXd::Zero(n), 0.0, false};
  Eigen::VectorXd z = llt.solve(d.cwiseProduct(c));
  const bool finite = z.allFinite();
  return {d.cwiseProduct(z), llt.rcond(), finite};
}

// Threshold below which an unregularized system is reported singular.
constexpr double kSingularRcond = 1e-13;

}  // namespace

void LabeledSample::validate() const {
  if (xs.size() != ys.size()) throw DataError("labeled sample: xs and ys differ in length");
  if (xs.empty()) throw DataError("labeled sample is empty");
  check_finite(xs, "source covariates");
  check_finite(ys, "source responses");
}

void UnlabeledSample::validate() const {
  if (xs.empty()) throw DataError("unlabeled sample is empty");
  check_finite(xs, "target covariates");
}

TiltProblem::TiltProblem(const LabeledSample& src, const UnlabeledSample& tgt,
                         const FeatureMap& fmap, const FeatureMap& bmap) {
  src.validate();
  tgt.validate();
  if (fmap.output_dim() < 1) throw DataError("the F class must have at least one feature");
  src_f_ = fmap.design_matrix(src.xs);
  src_b_ = bmap.design_matrix(src.xs);
  tgt_b_ = bmap.design_matrix(tgt.xs);
  y_ = Eigen::Map<const Eigen::VectorXd>(src.ys.data(), static_cast<Eigen::Index>(src.n()));

  const double inv_n = 1.0 / static_cast<double>(src.n());
  const double inv_m = 1.0 / static_cast<double>(tgt.m());
  a_ff_ = inv_n * (src_f_.transpose() * src_f_);
  a_fb_ = inv_n * (src_f_.transpose() * src_b_);
  a_bb_ = inv_n * (src_b_.transpose() * src_b_);
  b_bb_ = inv_m * (tgt_b_.transpose() * tgt_b_);
  c_f_ = inv_n * (src_f_.transpose() * y_);
  c_b_ = inv_n * (src_b_.transpose() * y_);
}

TiltFit TiltProblem::solve(const TiltConfig& cfg) const {
  if (!(cfg.lambda > 0.0) || !std::isfinite(cfg.lambda)) {
    throw DomainError("TILT lambda must be positive and finite");
  }
  if (!(cfg.ridge_f >= 0.0) || !(cfg.ridge_b >= 0.0)) {
    throw DomainError("ridge strengths must be nonnegative");
  }
  const Eigen::Index df = a_ff_.rows();
  const Eigen::Index db = a_bb_.rows();
  Eigen::MatrixXd k(df + db, df + db);
  k.topLeftCorner(df, df) = a_ff_;
  k.topLeftCorner(df, df).diagonal().array() += cfg.ridge_f;
  if (db > 0) {
    k.topRightCorner(df, db) = a_fb_;
    k.bottomLeftCorner(db, df) = a_fb_.transpose();
    k.bottomRightCorner(db, db) = a_bb_ + cfg.lambda * b_bb_;
    k.bottomRightCorner(db, db).diagonal().array() += cfg.ridge_b;
  }
  Eigen::VectorXd c(df + db);
  c.head(df) = c_f_;
  if (db > 0) c.tail(db) = c_b_;

  const bool unregularized = cfg.ridge_f == 0.0 && cfg.ridge_b == 0.0;
  SpdSolution sol = solve_spd(k, c);
  if (!sol.ok || (unregularized && sol.rcond < kSingularRcond)) {
    // Name the block: F alone first, then the B block given F.
    Eigen::MatrixXd kff = k.topLeftCorner(df, df);
    const SpdSolution f_only = solve_spd(kff, c.head(df));
    const bool f_bad = !f_only.ok || (unregularized && f_only.rcond < kSingularRcond);
    const std::string block = f_bad ? "F" : "B";
    std::ostringstream os;
    os << "TILT normal equations are rank deficient in the " << block
       << " block (" << (f_bad ? "source Gram of F features" : "source+target Gram of B features")
       << "); add ridge_" << (f_bad ? "f" : "b");
    throw RankDeficiencyError(block, os.str());
  }

  TiltFit fit;
  fit.theta = sol.x.head(df);
  fit.gamma = sol.x.tail(db);
  fit.condition_estimate = sol.rcond > 0.0 ? 1.0 / sol.rcond : INFINITY;
  fit.source_objective = objective(cfg, fit.theta, fit.gamma);
  return fit;
}

double TiltProblem::objective(const TiltConfig& cfg, const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& gamma) const {
  if (theta.size() != src_f_.cols() || gamma.size() != src_b_.cols()) {
    throw DataError("coefficient length mismatch");
  }
  Eigen::VectorXd resid = src_f_ * theta - y_;
  double target_term = 0.0;
  if (gamma.size() > 0) {
    resid += src_b_ * gamma;
    target_term = (tgt_b_ * gamma).squaredNorm() / static_cast<double>(tgt_b_.rows());
  }
  return resid.squaredNorm() / static_cast<double>(y_.size()) + cfg.lambda * target_term +
         cfg.ridge_f * theta.squaredNorm() + cfg.ridge_b * gamma.squaredNorm();
}

TiltFit tilt_fit(const LabeledSample& src, const UnlabeledSample& tgt, const FeatureMap& fmap,
                 const FeatureMap& bmap, const TiltConfig& cfg) {
  return TiltProblem(src, tgt, fmap, bmap).solve(cfg);
}

Eigen::VectorXd weighted_ridge_fit(const Eigen::MatrixXd& design, std::span<const double> ys,
                                   std::span<const double> weights, double ridge) {
  const auto n = static_cast<std::size_t>(design.rows());
  if (ys.size() != n || weights.size() != n) throw DataError("weighted fit: length mismatch");
  if (n == 0) throw DataError("weighted fit: empty sample");
  if (!(ridge >= 0.0)) throw DomainError("ridge must be nonnegative");
  check_finite(ys, "responses");
  check_finite(weights, "weights");
  bool any_positive = false;
  for (double w : weights) {
    if (w < 0.0) throw DataError("weights must be nonnegative");
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) throw DegenerateWeightsError("all weights are zero");

  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(n));
  const Eigen::Map<const Eigen::VectorXd> y(ys.data(), static_cast<Eigen::Index>(n));
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd gram = inv_n * (design.transpose() * w.asDiagonal() * design);
  gram.diagonal().array() += ridge;
  const Eigen::VectorXd rhs = inv_n * (design.transpose() * w.cwiseProduct(y));
  SpdSolution sol = solve_spd(gram, rhs);
  if (!sol.ok || (ridge == 0.0 && sol.rcond < kSingularRcond)) {
    throw RankDeficiencyError("F", "weighted normal equations are rank deficient; add ridge");
  }
  return sol.x;
}

Eigen::VectorXd weighted_ridge_fit(const LabeledSample& src, const FeatureMap& fmap,
                                   std::span<const double> weights, double ridge) {
  src.validate();
  return weighted_ridge_fit(fmap.design_matrix(src.xs), src.ys, weights, ridge);
}

std::vector<double> exact_ratio_weights(const DensityModel& p, const DensityModel& q,
                                        std::span<const double> xs) {
  return exact_relative_weights(p, q, 0.0, xs);
}

std::vector<double> exact_ratio_weights(const PopulationContext& ctx, std::span<const double> xs) {
  return exact_ratio_weights(ctx.p(), ctx.q(), xs);
}

std::vector<double> exact_relative_weights(const DensityModel& p, const DensityModel& q,
                                          double lambda, std::span<const double> xs) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw DomainError("relative-ratio lambda must be nonnegative and finite");
  }
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double qx = q.pdf(xs[i]);
    const double denom = p.pdf(xs[i]) + lambda * qx;
    if (!(denom > 0.0)) {
      std::ostringstream os;
      os << "density ratio undefined at x = " << xs[i] << ": source density is zero";
      throw DomainError(os.str());
    }
    out[i] = qx / denom;
  }
  return out;
}

std::vector<double> exact_relative_weights(const PopulationContext& ctx,
                                          std::span<const double> xs) {
  return exact_relative_weights(ctx.p(), ctx.q(), ctx.lambda(), xs);
}

KernelRatioEstimator::KernelRatioEstimator(std::vector<double> centers, double bandwidth,
                                           Eigen::VectorXd coeffs, double alpha, double ridge)
    : centers_(std::move(centers)),
      bandwidth_(bandwidth),
      coeffs_(std::move(coeffs)),
      alpha_(alpha),
      ridge_(ridge) {}

double KernelRatioEstimator::operator()(double x) const {
  const double inv = 1.0 / (2.0 * bandwidth_ * bandwidth_);
  double sum = 0.0;
  for (std::size_t j = 0; j < centers_.size(); ++j) {
    const double d = x - centers_[j];
    sum += coeffs_(static_cast<Eigen::Index>(j)) * std::exp(-d * d * inv);
  }
  return std::max(0.0, sum);
}

std::vector<double> KernelRatioEstimator::operator()(std::span<const double> xs) const {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (*this)(xs[i]);
  return out;
}

namespace {

Eigen::MatrixXd kernel_matrix(std::span<const double> xs, const std::vector<double>& centers,
                              double bandwidth) {
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  Eigen::MatrixXd k(static_cast<Eigen::Index>(xs.size()),
                    static_cast<Eigen::Index>(centers.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < centers.size(); ++j) {
      const double d = xs[i] - centers[j];
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::exp(-d * d * inv);
    }
  }
  return k;
}

struct RulsifMoments {
  Eigen::MatrixXd h_mat;
  Eigen::VectorXd h_vec;
};

RulsifMoments rulsif_moments(const Eigen::MatrixXd& k_src, const Eigen::MatrixXd& k_tgt,
                             double alpha) {
  RulsifMoments mom;
  mom.h_mat = (alpha / static_cast<double>(k_tgt.rows())) * (k_tgt.transpose() * k_tgt) +
              ((1.0 - alpha) / static_cast<double>(k_src.rows())) * (k_src.transpose() * k_src);
  mom.h_vec = k_tgt.colwise().mean().transpose();
  return mom;
}

Eigen::VectorXd rulsif_solve(const RulsifMoments& mom, double ridge) {
  Eigen::MatrixXd system = mom.h_mat;
  system.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) {
    throw NumericError("relative uLSIF system is not positive definite");
  }
  return llt.solve(mom.h_vec);
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

void validate_rulsif_args(std::span<const double> src_xs, std::span<const double> tgt_xs,
                          double alpha) {
  if (src_xs.empty() || tgt_xs.empty()) throw DataError("kernel ratio fit needs both samples");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in [0,1)");
  check_finite(src_xs, "source covariates");
  check_finite(tgt_xs, "target covariates");
}

}  // namespace

KernelRatioEstimator kernel_relative_ratio_fit(std::span<const double> src_xs,
                                               std::span<const double> tgt_xs, double alpha,
                                               std::vector<double> centers, double bandwidth,
                                               double ridge) {
  validate_rulsif_args(src_xs, tgt_xs, alpha);
  if (centers.empty()) throw DomainError("kernel ratio fit needs at least one center");
  if (!(bandwidth > 0.0)) throw DomainError("bandwidth must be positive");
  if (!(ridge > 0.0)) throw DomainError("ridge must be positive");
  const auto mom = rulsif_moments(kernel_matrix(src_xs, centers, bandwidth),
                                  kernel_matrix(tgt_xs, centers, bandwidth), alpha);
  Eigen::VectorXd beta = rulsif_solve(mom, ridge);
  return KernelRatioEstimator(std::move(centers), bandwidth, std::move(beta), alpha, ridge);
}

double median_heuristic_bandwidth(std::span<const double> a, std::span<const double> b,
                                  std::size_t max_points) {
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  if (pooled.size() > max_points && max_points > 1) {
    const double stride = static_cast<double>(pooled.size()) / static_cast<double>(max_points);
    std::vector<double> sub(max_points);
    for (std::size_t i = 0; i < max_points; ++i) {
      sub[i] = pooled[static_cast<std::size_t>(static_cast<double>(i) * stride)];
    }
    pooled = std::move(sub);
  }
  std::vector<double> dists;
  dists.reserve(pooled.size() * (pooled.size() - 1) / 2);
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    for (std::size_t j = i + 1; j < pooled.size(); ++j) dists.push_back(std::abs(pooled[i] - pooled[j]));
  }
  if (dists.empty()) return 1.0;
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid > 0.0 ? *mid : 1.0;
}

KernelRatioEstimator kernel_relative_ratio_fit_auto(std::span<const double> src_xs,
                                                    std::span<const double> tgt_xs, double alpha,
                                                    Rng& rng, const KernelRatioOptions& opts) {
  validate_rulsif_args(src_xs, tgt_xs, alpha);
  if (opts.ridge_grid.empty()) throw DomainError("ridge grid is empty");
  if (opts.folds < 2) throw DomainError("cross-validation needs at least two folds");

  std::vector<std::size_t> order(tgt_xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t num_centers = std::min(opts.max_centers, tgt_xs.size());
  std::vector<double> centers(num_centers);
  for (std::size_t j = 0; j < num_centers; ++j) centers[j] = tgt_xs[order[j]];
  const double bandwidth = median_heuristic_bandwidth(src_xs, tgt_xs);

  const Eigen::MatrixXd k_src = kernel_matrix(src_xs, centers, bandwidth);
  const Eigen::MatrixXd k_tgt = kernel_matrix(tgt_xs, centers, bandwidth);

  // Fold assignment by seeded permutation of each sample.
  auto fold_of = [&rng, &opts](std::size_t size) {
    std::vector<int> fold(size);
    for (std::size_t i = 0; i < size; ++i) fold[i] = static_cast<int>(i % static_cast<std::size_t>(opts.folds));
    std::shuffle(fold.begin(), fold.end(), rng);
    return fold;
  };
  const std::vector<int> src_fold = fold_of(src_xs.size());
  const std::vector<int> tgt_fold = fold_of(tgt_xs.size());

  std::vector<double> cv_score(opts.ridge_grid.size(), 0.0);
  for (int f = 0; f < opts.folds; ++f) {
    std::vector<Eigen::Index> s_tr, s_te, t_tr, t_te;
    for (std::size_t i = 0; i < src_fold.size(); ++i) {
      (src_fold[i] == f ? s_te : s_tr).push_back(static_cast<Eigen::Index>(i));
    }
    for (std::size_t i = 0; i < tgt_fold.size(); ++i) {
      (tgt_fold[i] == f ? t_te : t_tr).push_back(static_cast<Eigen::Index>(i));
    }
    if (s_tr.empty() || s_te.empty() || t_tr.empty() || t_te.empty()) continue;
    const auto train = rulsif_moments(select_rows(k_src, s_tr), select_rows(k_tgt, t_tr), alpha);
    const auto test = rulsif_moments(select_rows(k_src, s_te), select_rows(k_tgt, t_te), alpha);
    for (std::size_t r = 0; r < opts.ridge_grid.size(); ++r) {
      const Eigen::VectorXd beta = rulsif_solve(train, opts.ridge_grid[r]);
      cv_score[r] += 0.5 * beta.dot(test.h_mat * beta) - test.h_vec.dot(beta);
    }
  }
  const auto best = static_cast<std::size_t>(
      std::min_element(cv_score.begin(), cv_score.end()) - cv_score.begin());
  const double ridge = opts.ridge_grid[best];
  Eigen::VectorXd beta = rulsif_solve(rulsif_moments(k_src, k_tgt, alpha), ridge);
  return KernelRatioEstimator(std::move(centers), bandwidth, std::move(beta), alpha, ridge);
}

}  // namespace tilt
