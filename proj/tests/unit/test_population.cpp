#include <doctest.h>

#include <cmath>

#include "tilt/app/verify.hpp"
#include "tilt/errors.hpp"
#include "tilt/experiments.hpp"
#include "tilt/population.hpp"
#include "tilt/rng.hpp"

using namespace tilt;

namespace {

const TargetFunction kTruth = LinearTruth{}.to_function();

RealFunction poly(std::vector<double> c) {
  return [c](double x) {
    double s = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * x + *it;
    return s;
  };
}

/// Cell midpoints: Beta densities may both vanish at the endpoints.
std::vector<double> grid(int n) {
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = (i + 0.5) / n;
  return xs;
}

}  // namespace

TEST_CASE("v weight examples") {
  const PopulationContext same(DensityModel::beta(2, 5), DensityModel::beta(2, 5), 1.0);
  for (double x : grid(101)) CHECK(v_weight(same, x) == doctest::Approx(0.5));
  const PopulationContext mirror(DensityModel::beta(2, 5), DensityModel::beta(5, 2), 1.0);
  CHECK(v_weight(mirror, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("v and w are bounded and consistent") {
  Rng rng(5);
  for (int c = 0; c < 20; ++c) {
    const auto inst = app::random_decomposition_instance(rng);
    const PopulationContext ctx = inst.context(2001);
    const double lam = ctx.lambda();
    for (double x : grid(1001)) {
      const double v = v_weight(ctx, x);
      const double w = w_weight(ctx, x);
      const double p = ctx.p().pdf(x), q = ctx.q().pdf(x);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(w >= 0.0);
      CHECK(w <= 1.0 / lam + 1e-12);
      if (p + q > 0.0) {
        CHECK(std::abs(v * (p + lam * q) - p) <= 1e-12 * std::max(p, 1e-300) + 1e-300);
      }
    }
  }
}

TEST_CASE("optimal offset examples and boundedness") {
  const PopulationContext ctx(DensityModel::beta(2, 5), DensityModel::beta(5, 2), 0.3);
  const RealFunction f = poly({0.1, 0.5, -0.2});
  for (double x : grid(1001)) {
    CHECK(optimal_offset(ctx, kTruth.eval, kTruth, x) == 0.0);
    CHECK(std::abs(optimal_offset(ctx, f, kTruth, x)) <= std::abs(f(x) - kTruth(x)));
  }
  const PopulationContext big(DensityModel::beta(2, 5), DensityModel::beta(5, 2), 1e9);
  for (double x : grid(101)) {
    // The limit needs lambda q to dominate p; check where q is at least p.
    if (big.q().pdf(x) < big.p().pdf(x)) continue;
    CHECK(std::abs(optimal_offset(big, f, kTruth, x)) <= 1e-8 * std::abs(f(x) - kTruth(x)));
  }
}

TEST_CASE("err_lambda_sq examples") {
  const RealFunction f = poly({0.2, -0.3, 0.4});
  const DensityModel q = DensityModel::beta(2, 5);
  const PopulationContext same(q, q, 0.5, 512, QuadRule::GaussLegendre);
  CHECK(err_lambda_sq(same, kTruth.eval, kTruth) == 0.0);
  const double direct = same.quadrature().integrate(
      [&](double x) { return (f(x) - kTruth(x)) * (f(x) - kTruth(x)) * q.pdf(x); });
  CHECK(err_lambda_sq(same, f, kTruth) == doctest::Approx(direct / 1.5).epsilon(1e-12));

  const PopulationContext c1(DensityModel::beta(5, 2), q, 1.0);
  CHECK(err_lambda_sq(c1.with_lambda(2.0), f, kTruth) <= err_lambda_sq(c1, f, kTruth));

  // Err^2 approaches the target excess risk as lambda shrinks.
  const double target = target_excess_risk(c1, f, kTruth);
  double prev = 1e300;
  for (double lam : {1e-1, 1e-2, 1e-3}) {
    const double gap = std::abs(err_lambda_sq(c1.with_lambda(lam), f, kTruth) / target - 1.0);
    CHECK(gap < prev);
    prev = gap;
  }
}

TEST_CASE("auxiliary excess risk examples") {
  const PopulationContext ctx(DensityModel::beta(3, 4), DensityModel::beta(2, 5), 0.7);
  const RealFunction zero = [](double) { return 0.0; };
  CHECK(auxiliary_excess_risk(ctx, kTruth.eval, zero, kTruth) == 0.0);
  const RealFunction f = poly({0.4, -0.1, 0.3});
  const double src = ctx.quadrature().integrate([&](double x) {
    return (f(x) - kTruth(x)) * (f(x) - kTruth(x)) * ctx.p().pdf(x);
  });
  CHECK(auxiliary_excess_risk(ctx, f, zero, kTruth) == doctest::Approx(src).epsilon(1e-12));
}

TEST_CASE("auxiliary excess risk matches a Monte Carlo estimate") {
  const DensityModel p = DensityModel::beta(2, 3), q = DensityModel::beta(4, 2);
  const double lam = 0.8;
  const PopulationContext ctx(p, q, lam);
  const RealFunction f = poly({0.5, 0.2, -0.6, 0.3});
  const RealFunction b = poly({-0.1, 0.4, -0.2});
  const double exact = auxiliary_excess_risk(ctx, f, b, kTruth);

  Rng rng(2026);
  const std::size_t n = 1000000;
  auto moments = [&](const DensityModel& law, auto&& g) {
    double s = 0.0, s2 = 0.0;
    for (double x : law.sample(rng, n)) {
      const double v = g(x);
      s += v;
      s2 += v * v;
    }
    const double mean = s / n;
    return std::pair{mean, (s2 / n - mean * mean) / n};
  };
  const auto [mp, vp] = moments(p, [&](double x) {
    const double r = f(x) + b(x) - kTruth(x);
    return r * r;
  });
  const auto [mq, vq] = moments(q, [&](double x) { return b(x) * b(x); });
  const double estimate = mp + lam * mq;
  const double se = std::sqrt(vp + lam * lam * vq);
  CHECK(std::abs(estimate - exact) <= 3.0 * se);
}

TEST_CASE("decomposition identity on random instances") {
  Rng rng(20260101);
  for (int c = 0; c < 10; ++c) {
    const auto inst = app::random_decomposition_instance(rng);
    const PopulationContext ctx = inst.context();
    const DecompositionReport r = verify_decomposition(ctx, inst.f(), inst.b(), kTruth);
    CHECK(r.rel_gap <= 1e-8);
    // The optimal offset makes the residual vanish.
    const RealFunction f = inst.f();
    const RealFunction bstar = [&](double x) { return optimal_offset(ctx, f, kTruth, x); };
    const DecompositionReport opt = verify_decomposition(ctx, f, bstar, kTruth);
    CHECK(opt.offset_gap_sq <= 1e-14 * std::max(1.0, opt.lhs));
    CHECK(opt.lhs / ctx.lambda() == doctest::Approx(err_lambda_sq(ctx, f, kTruth)).epsilon(1e-9));
  }
  const PopulationContext ctx(DensityModel::beta(2, 5), DensityModel::beta(5, 2), 1.0);
  const RealFunction zero = [](double) { return 0.0; };
  const DecompositionReport trivial = verify_decomposition(ctx, kTruth.eval, zero, kTruth);
  CHECK(std::abs(trivial.lhs) <= 1e-12);
  CHECK(std::abs(trivial.rhs) <= 1e-12);
}

TEST_CASE("doubling the quadrature barely moves the decomposition") {
  Rng rng(8);
  for (int c = 0; c < 5; ++c) {
    const auto inst = app::random_decomposition_instance(rng);
    const auto a = verify_decomposition(inst.context(20001), inst.f(), inst.b(), kTruth);
    const auto b = verify_decomposition(inst.context(40001), inst.f(), inst.b(), kTruth);
    CHECK(std::abs(a.lhs - b.lhs) <= 1e-8 * std::max(1.0, std::abs(b.lhs)));
    CHECK(std::abs(a.rhs - b.rhs) <= 1e-8 * std::max(1.0, std::abs(b.rhs)));
  }
}

TEST_CASE("profiled risk over a rich RBF span approaches Err^2 from above") {
  const PopulationContext ctx(DensityModel::beta(2, 5), DensityModel::beta(5, 2), 0.5, 20001);
  const RealFunction f = poly({0.2, 0.5, -0.3});
  const double err = err_lambda_sq(ctx, f, kTruth);
  const double profiled =
      profiled_risk_in_span(ctx, f, kTruth, FeatureMap::gaussian_rbf_uniform(200, 0.02));
  CHECK(profiled >= err - 1e-12);
  CHECK(profiled - err <= 1e-3);
}

TEST_CASE("atoms are rejected by population contexts") {
  const DensityModel atom = DensityModel::atom_mixture(0.0, 0.5, DensityModel::uniform());
  CHECK_THROWS_AS(PopulationContext(atom, DensityModel::uniform(), 1.0), ConfigError);
  CHECK_THROWS(PopulationContext(DensityModel::uniform(), DensityModel::uniform(), 0.0));
}
