#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tilt/features.hpp"
#include "tilt/population.hpp"
#include "tilt/rng.hpp"

namespace tilt::app {

/// One randomized population instance: Beta source and target, lambda,
/// a Legendre predictor f and an RBF offset b, with the default linear
/// response as f*.
struct DecompositionInstance {
  double p_a, p_b, q_a, q_b;
  double lambda;
  std::vector<double> f_coeffs;
  std::vector<double> b_centers;
  double b_bandwidth;
  std::vector<double> b_coeffs;

  PopulationContext context(int quad_points = PopulationContext::kDefaultTrapezoidPoints) const;
  RealFunction f() const;
  RealFunction b() const;
  nlohmann::json to_json() const;
};

/// Beta parameters in [2, 6], lambda log-uniform on [1e-3, 1e3].
DecompositionInstance random_decomposition_instance(Rng& rng);

struct VerifyOutcome {
  std::string kind;
  double tol;
  std::size_t cases;
  double max_rel_gap;
  bool pass;
  nlohmann::json worst_case;

  nlohmann::json to_json() const;
};

VerifyOutcome verify_decomposition_suite(std::size_t cases, std::uint64_t seed, double tol);
/// Pointwise Bregman-TILT split, alternating LogSumExp (K = 5) and quadratic
/// (dim 5) generators; gaps are relative to max(1, |risk|).
VerifyOutcome verify_bregman_suite(std::size_t cases, std::uint64_t seed, double tol);
/// Normalization of random Beta and tilted-cosine densities.
VerifyOutcome verify_densities_suite(std::size_t cases, std::uint64_t seed, double tol);

/// Dispatches on "decomposition", "bregman" or "densities"; ConfigError otherwise.
VerifyOutcome run_verify_suite(const std::string& kind, std::size_t cases, std::uint64_t seed,
                               double tol);

}  // namespace tilt::app
