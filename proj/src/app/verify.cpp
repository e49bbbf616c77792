#include "tilt/app/verify.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "tilt/app/config.hpp"
#include "tilt/bregman.hpp"
#include "tilt/errors.hpp"
#include "tilt/experiments.hpp"

namespace tilt::app {
namespace {

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::vector<double> normals(Rng& rng, std::size_t count, double sd) {
  std::normal_distribution<double> dist(0.0, sd);
  std::vector<double> out(count);
  for (auto& v : out) v = dist(rng);
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

VerifyOutcome start(const std::string& kind, std::size_t cases, double tol) {
  if (!(tol >= 0.0)) throw ConfigError("tol", "must be nonnegative");
  return VerifyOutcome{kind, tol, cases, 0.0, true, nullptr};
}

void finish(VerifyOutcome& out) {
  out.pass = out.max_rel_gap <= out.tol;
}

}  // namespace

PopulationContext DecompositionInstance::context(int quad_points) const {
  return PopulationContext(DensityModel::beta(p_a, p_b), DensityModel::beta(q_a, q_b), lambda,
                           quad_points);
}

RealFunction DecompositionInstance::f() const {
  const FeatureMap map = FeatureMap::shifted_legendre(static_cast<int>(f_coeffs.size()) - 1);
  const Eigen::VectorXd c = to_vector(f_coeffs);
  return [map, c](double x) { return evaluate_expansion(map, c, x); };
}

RealFunction DecompositionInstance::b() const {
  const FeatureMap map = FeatureMap::gaussian_rbf(b_centers, b_bandwidth);
  const Eigen::VectorXd c = to_vector(b_coeffs);
  return [map, c](double x) { return evaluate_expansion(map, c, x); };
}

nlohmann::json DecompositionInstance::to_json() const {
  return {{"p", {{"kind", "beta"}, {"a", p_a}, {"b", p_b}}},
          {"q", {{"kind", "beta"}, {"a", q_a}, {"b", q_b}}},
          {"lambda", lambda},
          {"f_legendre_coeffs", f_coeffs},
          {"b_rbf_centers", b_centers},
          {"b_rbf_bandwidth", b_bandwidth},
          {"b_rbf_coeffs", b_coeffs},
          {"fstar", "default linear-shift response"}};
}

DecompositionInstance random_decomposition_instance(Rng& rng) {
  DecompositionInstance inst;
  inst.p_a = uniform(rng, 2.0, 6.0);
  inst.p_b = uniform(rng, 2.0, 6.0);
  inst.q_a = uniform(rng, 2.0, 6.0);
  inst.q_b = uniform(rng, 2.0, 6.0);
  inst.lambda = std::pow(10.0, uniform(rng, -3.0, 3.0));
  const auto degree = std::uniform_int_distribution<int>(1, 5)(rng);
  inst.f_coeffs = normals(rng, static_cast<std::size_t>(degree) + 1, 0.5);
  const auto centers = std::uniform_int_distribution<int>(3, 8)(rng);
  inst.b_centers.resize(static_cast<std::size_t>(centers));
  for (auto& c : inst.b_centers) c = uniform(rng, 0.0, 1.0);
  inst.b_bandwidth = uniform(rng, 0.05, 0.3);
  inst.b_coeffs = normals(rng, inst.b_centers.size(), 0.3);
  return inst;
}

nlohmann::json VerifyOutcome::to_json() const {
  return {{"kind", kind},   {"tol", tol},   {"cases", cases},
          {"max_rel_gap", max_rel_gap}, {"pass", pass}, {"worst_case", worst_case}};
}

VerifyOutcome verify_decomposition_suite(std::size_t cases, std::uint64_t seed, double tol) {
  VerifyOutcome out = start("decomposition", cases, tol);
  const TargetFunction fstar = LinearTruth{}.to_function();
  double worst = -1.0;
  for (std::size_t i = 0; i < cases; ++i) {
    Rng rng = make_stream(seed, 0, i);
    const DecompositionInstance inst = random_decomposition_instance(rng);
    const DecompositionReport rep = verify_decomposition(inst.context(), inst.f(), inst.b(), fstar);
    if (rep.rel_gap > worst) {
      worst = rep.rel_gap;
      out.worst_case = {{"case", i},       {"seed", seed},     {"instance", inst.to_json()},
                        {"lhs", rep.lhs},  {"rhs", rep.rhs},   {"abs_gap", rep.abs_gap},
                        {"rel_gap", rep.rel_gap}};
    }
  }
  out.max_rel_gap = std::max(worst, 0.0);
  finish(out);
  return out;
}

VerifyOutcome verify_bregman_suite(std::size_t cases, std::uint64_t seed, double tol) {
  VerifyOutcome out = start("bregman", cases, tol);
  constexpr int kDim = 5;
  double worst = -1.0;
  for (std::size_t i = 0; i < cases; ++i) {
    Rng rng = make_stream(seed, 1, i);
    const bool lse = i % 2 == 0;
    const Generator gen = lse ? Generator::log_sum_exp(kDim) : Generator::quadratic(kDim);
    auto draw_mean = [&] {
      const Eigen::VectorXd z = to_vector(normals(rng, kDim, 1.0));
      return lse ? softmax(z) : z;
    };
    const Eigen::VectorXd mu_star = draw_mean();
    const Eigen::VectorXd mu_f = draw_mean();
    const Eigen::VectorXd mu_c = draw_mean();
    const double v = uniform(rng, 0.0, 1.0);
    const double rho = std::pow(10.0, uniform(rng, -1.0, 1.0));
    const BregmanTiltTerms t = bregman_tilt_risk_pointwise(gen, v, rho, mu_c, mu_star, mu_f);
    const double gap = std::abs(t.risk_integrand - t.jensen_term - t.residual_term) /
                       std::max(1.0, std::abs(t.risk_integrand));
    if (gap > worst) {
      worst = gap;
      out.worst_case = {{"case", i},
                        {"seed", seed},
                        {"generator", lse ? "log_sum_exp" : "quadratic"},
                        {"dim", kDim},
                        {"v_lambda", v},
                        {"rho_lambda", rho},
                        {"mu_corrected", to_std(mu_c)},
                        {"mu_star", to_std(mu_star)},
                        {"mu_f", to_std(mu_f)},
                        {"risk_integrand", t.risk_integrand},
                        {"jensen_term", t.jensen_term},
                        {"residual_term", t.residual_term},
                        {"rel_gap", gap}};
    }
  }
  out.max_rel_gap = std::max(worst, 0.0);
  finish(out);
  return out;
}

VerifyOutcome verify_densities_suite(std::size_t cases, std::uint64_t seed, double tol) {
  VerifyOutcome out = start("densities", cases, tol);
  const Quadrature quad = Quadrature::gauss_legendre(512);
  double worst = -1.0;
  for (std::size_t i = 0; i < cases; ++i) {
    Rng rng = make_stream(seed, 2, i);
    const bool beta = i % 2 == 0;
    const DensityModel model = beta ? DensityModel::beta(uniform(rng, 2.0, 6.0), uniform(rng, 2.0, 6.0))
                                    : DensityModel::tilted_cosine(uniform(rng, 0.0, 3.0));
    const double mass = quad.integrate([&model](double x) { return model.pdf(x); });
    const double gap = std::abs(mass - 1.0);
    if (gap > worst) {
      worst = gap;
      out.worst_case = {{"case", i}, {"seed", seed}, {"density", density_to_json(model)},
                        {"integral", mass}, {"rel_gap", gap}};
    }
  }
  out.max_rel_gap = std::max(worst, 0.0);
  finish(out);
  return out;
}

VerifyOutcome run_verify_suite(const std::string& kind, std::size_t cases, std::uint64_t seed,
                               double tol) {
  if (cases < 1) throw ConfigError("cases", "must be at least 1");
  if (kind == "decomposition") return verify_decomposition_suite(cases, seed, tol);
  if (kind == "bregman") return verify_bregman_suite(cases, seed, tol);
  if (kind == "densities") return verify_densities_suite(cases, seed, tol);
  throw ConfigError("kind", "expected decomposition, bregman or densities");
}

}  // namespace tilt::app
