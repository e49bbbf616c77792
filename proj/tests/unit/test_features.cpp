#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "tilt/errors.hpp"
#include "tilt/features.hpp"
#include "tilt/quadrature.hpp"

using namespace tilt;

namespace {

std::vector<double> uniform_grid(int n) {
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = static_cast<double>(i) / (n - 1);
  return xs;
}

/// Trapezoid Gram matrix on a uniform grid.
Eigen::MatrixXd trapezoid_gram(const FeatureMap& map, int n) {
  const auto xs = uniform_grid(n);
  Eigen::MatrixXd x = map.design_matrix(xs);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / (n - 1));
  w(0) *= 0.5;
  w(n - 1) *= 0.5;
  return x.transpose() * w.asDiagonal() * x;
}

}  // namespace

TEST_CASE("featurize examples") {
  const Eigen::VectorXd s = FeatureMap::sine(3).featurize(0.0);
  REQUIRE(s.size() == 3);
  CHECK(s.norm() == 0.0);
  for (double x : {0.0, 0.25, 0.9}) {
    const Eigen::VectorXd l = FeatureMap::shifted_legendre(1).featurize(x);
    REQUIRE(l.size() == 2);
    CHECK(l(0) == doctest::Approx(1.0));
    CHECK(l(1) == doctest::Approx(std::sqrt(3.0) * (2 * x - 1)));
  }
  CHECK(FeatureMap::zero().featurize(0.4).size() == 0);
  CHECK(FeatureMap::zero().output_dim() == 0);
  const Eigen::VectorXd k = FeatureMap::sine(4).featurize(0.3);
  for (int j = 0; j < 4; ++j) {
    CHECK(k(j) == doctest::Approx(std::sqrt(2.0) * std::sin(std::numbers::pi * (j + 1) * 0.3)));
  }
}

TEST_CASE("design matrix examples") {
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(FeatureMap::sine(2).design_matrix(zeros).norm() == 0.0);
  const std::vector<double> half{0.5};
  const Eigen::MatrixXd r = FeatureMap::gaussian_rbf({0.5}, 0.1).design_matrix(half);
  REQUIRE(r.rows() == 1);
  REQUIRE(r.cols() == 1);
  CHECK(r(0, 0) == doctest::Approx(1.0));
  const auto grid = uniform_grid(20001);
  const Eigen::MatrixXd x = FeatureMap::shifted_legendre(3).design_matrix(grid);
  const Eigen::MatrixXd g = x.transpose() * x / 20001.0;
  CHECK((g - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("orthonormal families under the uniform measure") {
  for (const auto& map : {FeatureMap::shifted_legendre(3), FeatureMap::shifted_legendre(6),
                          FeatureMap::fourier(9), FeatureMap::fourier(20), FeatureMap::sine(12)}) {
    CAPTURE(map.describe());
    const Eigen::MatrixXd g = trapezoid_gram(map, 20001);
    CHECK((g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("high-degree Legendre Gram under Gauss-Legendre quadrature") {
  const FeatureMap map = FeatureMap::shifted_legendre(19);
  const Quadrature quad = Quadrature::gauss_legendre(64);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(20, 20);
  for (std::size_t i = 0; i < quad.size(); ++i) {
    const Eigen::VectorXd phi = map.featurize(quad.nodes[i]);
    g += quad.weights[i] * phi * phi.transpose();
  }
  CHECK((g - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("Fourier ordering is 1, cos, sin, ...") {
  const Eigen::VectorXd f = FeatureMap::fourier(5).featurize(0.1);
  const double r2 = std::sqrt(2.0), t = 2 * std::numbers::pi * 0.1;
  CHECK(f(0) == doctest::Approx(1.0));
  CHECK(f(1) == doctest::Approx(r2 * std::cos(t)));
  CHECK(f(2) == doctest::Approx(r2 * std::sin(t)));
  CHECK(f(3) == doctest::Approx(r2 * std::cos(2 * t)));
  CHECK(f(4) == doctest::Approx(r2 * std::sin(2 * t)));
}

TEST_CASE("featurize is pure and finite") {
  const auto maps = {FeatureMap::shifted_legendre(19), FeatureMap::fourier(20),
                     FeatureMap::sine(64), FeatureMap::gaussian_rbf_uniform(25, 0.1)};
  const auto grid = uniform_grid(1001);
  for (const auto& map : maps) {
    const Eigen::MatrixXd a = map.design_matrix(grid);
    const Eigen::MatrixXd b = map.design_matrix(grid);
    CHECK((a.array() == b.array()).all());
    CHECK(a.allFinite());
    for (std::size_t i = 0; i < grid.size(); i += 97) {
      CHECK((map.featurize(grid[i]).transpose().array() == a.row(i).array()).all());
    }
  }
}

TEST_CASE("sine spans are nested") {
  const auto grid = uniform_grid(501);
  const Eigen::MatrixXd small = FeatureMap::sine(5).design_matrix(grid);
  const Eigen::MatrixXd large = FeatureMap::sine(9).design_matrix(grid);
  const Eigen::MatrixXd coef = large.colPivHouseholderQr().solve(small);
  CHECK((large * coef - small).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("uniform RBF centers and expansion evaluation") {
  const FeatureMap rbf = FeatureMap::gaussian_rbf_uniform(25, 0.1);
  REQUIRE(rbf.centers().size() == 25);
  CHECK(rbf.centers().front() == 0.0);
  CHECK(rbf.centers().back() == 1.0);
  CHECK(rbf.bandwidth() == 0.1);
  const FeatureMap leg = FeatureMap::shifted_legendre(2);
  Eigen::VectorXd c(3);
  c << 1.0, -2.0, 0.5;
  CHECK(evaluate_expansion(leg, c, 0.3) == doctest::Approx(leg.featurize(0.3).dot(c)));
}

TEST_CASE("invalid feature maps are rejected") {
  CHECK_THROWS_AS(FeatureMap::shifted_legendre(-1), DomainError);
  CHECK_THROWS_AS(FeatureMap::sine(0), DomainError);
  CHECK_THROWS_AS(FeatureMap::gaussian_rbf({0.5}, 0.0), DomainError);
  CHECK_THROWS_AS(FeatureMap::gaussian_rbf({}, 0.1), DomainError);
}
