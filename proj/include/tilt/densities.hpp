#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "tilt/rng.hpp"

namespace tilt {

/// Covariate laws on [0,1]: an absolutely continuous part plus optional atoms.
///
/// Values are immutable after construction and cheap to copy; an atom
/// mixture shares its continuous component through a shared_ptr.
class DensityModel {
 public:
  enum class Kind { Beta, Uniform01, AtomMixture, TiltedCosine };

  struct Atom {
    double location;
    double mass;
  };

  /// Uniform01 by default.
  DensityModel();

  static DensityModel beta(double a, double b);
  static DensityModel uniform();
  /// Density proportional to exp(kappa * cos(2 pi x)).
  static DensityModel tilted_cosine(double kappa);
  /// `atom_mass` at `location`, remaining mass spread as `continuous_part`.
  static DensityModel atom_mixture(double location, double atom_mass, DensityModel continuous_part);

  Kind kind() const noexcept;

  /// Density of the absolutely continuous part; atoms are not folded in.
  double pdf(double x) const;

  std::vector<Atom> atoms() const;
  double total_atom_mass() const noexcept;
  bool has_atoms() const noexcept { return total_atom_mass() > 0.0; }

  double sample_one(Rng& rng) const;
  std::vector<double> sample(Rng& rng, std::size_t count) const;

  // Kind-specific accessors; each throws DomainError for the wrong kind.
  double beta_a() const;
  double beta_b() const;
  double kappa() const;
  const DensityModel& continuous_part() const;

  /// Short human-readable form, e.g. "Beta(2,5)".
  std::string describe() const;

  friend bool operator==(const DensityModel& lhs, const DensityModel& rhs);

 private:
  struct BetaParams {
    double a, b, log_norm;
  };
  struct UniformParams {};
  struct TiltedCosineParams {
    double kappa, norm;
  };
  struct AtomParams {
    double location, mass;
    std::shared_ptr<const DensityModel> continuous;
  };
  using Params = std::variant<BetaParams, UniformParams, AtomParams, TiltedCosineParams>;

  explicit DensityModel(Params params) : params_(std::move(params)) {}

  Params params_;
};

double pdf(const DensityModel& model, double x);
std::vector<double> sample(const DensityModel& model, Rng& rng, std::size_t count);

/// Source path from a matched endpoint toward a shifted one.
struct ShiftPath {
  DensityModel endpoint_a;
  DensityModel endpoint_b;
  std::vector<double> levels;

  /// `count` equally spaced levels on [0,1].
  static std::vector<double> equally_spaced_levels(std::size_t count);
};

/// Beta endpoints interpolate their (a,b) parameters linearly. Other endpoint
/// kinds only admit levels 0 and 1.
DensityModel interpolate_source(const ShiftPath& path, double level);

/// Bounds of q/p for TiltedCosine q against Uniform01 p: {min, max}.
struct RatioBounds {
  double min;
  double max;
};
RatioBounds tilted_cosine_ratio_bounds(double kappa);

}  // namespace tilt
