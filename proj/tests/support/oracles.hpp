#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tilt/features.hpp"
#include "tilt/rng.hpp"
#include "tilt/solvers.hpp"

namespace tilt::oracle {

struct JointInstance {
  LabeledSample src;
  UnlabeledSample tgt;
  FeatureMap fmap;
  FeatureMap bmap;
  TiltConfig cfg;
};

/// n = m = 40 draws from a random Beta pair, Legendre F and Fourier or RBF B
/// with dimensions at most 6, lambda log-uniform on [1e-2, 1e2].
inline JointInstance random_joint_instance(Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.1);
  auto beta = [&] { return DensityModel::beta(1.0 + 4.0 * unit(rng), 1.0 + 4.0 * unit(rng)); };
  const DensityModel p = beta(), q = beta();
  JointInstance inst{{p.sample(rng, 40), {}},
                     {q.sample(rng, 40)},
                     FeatureMap::shifted_legendre(1 + static_cast<int>(unit(rng) * 5)),
                     FeatureMap::zero(),
                     {}};
  for (double x : inst.src.xs) inst.src.ys.push_back(std::sin(3.0 * x) + noise(rng));
  const int db = 1 + static_cast<int>(unit(rng) * 6);
  if (unit(rng) < 0.5) {
    inst.bmap = FeatureMap::fourier(db);
  } else {
    inst.bmap = FeatureMap::gaussian_rbf_uniform(db, 0.2 + 0.3 * unit(rng));
  }
  inst.cfg.lambda = std::pow(10.0, -2.0 + 4.0 * unit(rng));
  inst.cfg.ridge_f = 1e-6;
  inst.cfg.ridge_b = 1e-6;
  return inst;
}

/// Accelerated gradient descent with adaptive restart on the joint
/// objective, computed from residuals rather than normal equations.
/// Returns the stacked coefficients (theta, gamma).
inline Eigen::VectorXd minimize_joint_objective(const JointInstance& inst,
                                                int max_iters = 2000000, double grad_tol = 1e-13) {
  const Eigen::MatrixXd xf = inst.fmap.design_matrix(inst.src.xs);
  const Eigen::MatrixXd xb = inst.bmap.design_matrix(inst.src.xs);
  const Eigen::MatrixXd tb = inst.bmap.design_matrix(inst.tgt.xs);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(inst.src.ys.data(), inst.src.ys.size());
  const double n = static_cast<double>(xf.rows()), m = static_cast<double>(tb.rows());
  const int df = static_cast<int>(xf.cols()), db = static_cast<int>(xb.cols());
  const auto& c = inst.cfg;

  auto grad = [&](const Eigen::VectorXd& z) {
    const auto th = z.head(df);
    const auto ga = z.tail(db);
    const Eigen::VectorXd r = xf * th + xb * ga - y;
    const Eigen::VectorXd t = tb * ga;
    Eigen::VectorXd g(df + db);
    g.head(df) = 2.0 / n * (xf.transpose() * r) + 2.0 * c.ridge_f * th;
    g.tail(db) = 2.0 / n * (xb.transpose() * r) + 2.0 * c.lambda / m * (tb.transpose() * t) +
                 2.0 * c.ridge_b * ga;
    return g;
  };
  // Lipschitz constant of the gradient by power iteration on the linear part.
  const Eigen::VectorXd g0 = grad(Eigen::VectorXd::Zero(df + db));
  Eigen::VectorXd u = Eigen::VectorXd::Ones(df + db).normalized();
  double lip = 1.0;
  for (int i = 0; i < 500; ++i) {
    const Eigen::VectorXd hu = grad(u) - g0;
    lip = hu.norm();
    u = hu / lip;
  }
  const double step = 1.0 / (1.05 * lip);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(df + db), x_prev = x, yk = x;
  double t = 1.0;
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd g = grad(yk);
    if (g.norm() < grad_tol) break;
    x_prev = x;
    x = yk - step * g;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (g.dot(x - x_prev) > 0.0) {
      t = 1.0;  // restart when momentum points uphill
      yk = x;
      continue;
    }
    yk = x + (t - 1.0) / t_next * (x - x_prev);
    t = t_next;
  }
  return x;
}

/// Weighted ridge normal equations solved through an eigendecomposition.
inline Eigen::VectorXd weighted_ridge_by_eigen(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                               const Eigen::VectorXd& w, double ridge) {
  const double n = static_cast<double>(x.rows());
  const Eigen::MatrixXd a =
      x.transpose() * w.asDiagonal() * x / n + ridge * Eigen::MatrixXd::Identity(x.cols(), x.cols());
  const Eigen::VectorXd rhs = x.transpose() * w.asDiagonal() * y / n;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::MatrixXd& v = es.eigenvectors();
  return v * ((v.transpose() * rhs).array() / es.eigenvalues().array()).matrix();
}

}  // namespace tilt::oracle
