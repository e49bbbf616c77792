#include "tilt/densities.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "tilt/errors.hpp"

namespace tilt {
namespace {

void check_unit_interval(double x) {
  if (!(x >= 0.0 && x <= 1.0)) {
    std::ostringstream os;
    os << "x = " << x << " is outside the support [0,1]";
    throw DomainError(os.str());
  }
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

DensityModel::DensityModel() : params_(UniformParams{}) {}

DensityModel DensityModel::beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw DomainError("Beta parameters must be positive and finite");
  }
  const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return DensityModel(BetaParams{a, b, -log_beta});
}

DensityModel DensityModel::uniform() { return DensityModel(UniformParams{}); }

DensityModel DensityModel::tilted_cosine(double kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw DomainError("TiltedCosine kappa must be nonnegative and finite");
  }
  // int_0^1 exp(kappa cos 2 pi x) dx = I_0(kappa)
  return DensityModel(TiltedCosineParams{kappa, std::cyl_bessel_i(0.0, kappa)});
}

DensityModel DensityModel::atom_mixture(double location, double atom_mass,
                                        DensityModel continuous_part) {
  check_unit_interval(location);
  if (!(atom_mass >= 0.0 && atom_mass <= 1.0)) {
    throw DomainError("atom mass must lie in [0,1]");
  }
  if (continuous_part.has_atoms()) {
    throw DomainError("nested atom mixtures are not supported");
  }
  return DensityModel(AtomParams{location, atom_mass,
                                 std::make_shared<const DensityModel>(std::move(continuous_part))});
}

DensityModel::Kind DensityModel::kind() const noexcept {
  return std::visit(overloaded{[](const BetaParams&) { return Kind::Beta; },
                               [](const UniformParams&) { return Kind::Uniform01; },
                               [](const AtomParams&) { return Kind::AtomMixture; },
                               [](const TiltedCosineParams&) { return Kind::TiltedCosine; }},
                    params_);
}

double DensityModel::pdf(double x) const {
  check_unit_interval(x);
  return std::visit(
      overloaded{[x](const BetaParams& p) {
                   if ((x == 0.0 && p.a > 1.0) || (x == 1.0 && p.b > 1.0)) return 0.0;
                   // Unit exponents contribute nothing, including at the endpoints.
                   const double left = p.a == 1.0 ? 0.0 : (p.a - 1.0) * std::log(x);
                   const double right = p.b == 1.0 ? 0.0 : (p.b - 1.0) * std::log1p(-x);
                   return std::exp(p.log_norm + left + right);
                 },
                 [](const UniformParams&) { return 1.0; },
                 [x](const AtomParams& p) { return (1.0 - p.mass) * p.continuous->pdf(x); },
                 [x](const TiltedCosineParams& p) {
                   return std::exp(p.kappa * std::cos(2.0 * std::numbers::pi * x)) / p.norm;
                 }},
      params_);
}

std::vector<DensityModel::Atom> DensityModel::atoms() const {
  if (const auto* p = std::get_if<AtomParams>(&params_); p != nullptr && p->mass > 0.0) {
    return {Atom{p->location, p->mass}};
  }
  return {};
}

double DensityModel::total_atom_mass() const noexcept {
  if (const auto* p = std::get_if<AtomParams>(&params_)) return p->mass;
  return 0.0;
}

double DensityModel::sample_one(Rng& rng) const {
  return std::visit(
      overloaded{[&rng](const BetaParams& p) {
                   // Two-gamma construction: X/(X+Y) with X~Gamma(a), Y~Gamma(b).
                   std::gamma_distribution<double> ga(p.a, 1.0);
                   std::gamma_distribution<double> gb(p.b, 1.0);
                   const double x = ga(rng);
                   const double y = gb(rng);
                   return x / (x + y);
                 },
                 [&rng](const UniformParams&) {
                   return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
                 },
                 [&rng](const AtomParams& p) {
                   const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
                   return u < p.mass ? p.location : p.continuous->sample_one(rng);
                 },
                 [&rng](const TiltedCosineParams& p) {
                   // Rejection from Unif[0,1]; acceptance rate I_0(kappa) e^{-kappa}.
                   std::uniform_real_distribution<double> unif(0.0, 1.0);
                   for (;;) {
                     const double x = unif(rng);
                     const double u = unif(rng);
                     if (u < std::exp(p.kappa * (std::cos(2.0 * std::numbers::pi * x) - 1.0))) {
                       return x;
                     }
                   }
                 }},
      params_);
}

std::vector<double> DensityModel::sample(Rng& rng, std::size_t count) const {
  std::vector<double> out(count);
  for (auto& x : out) x = sample_one(rng);
  return out;
}

double DensityModel::beta_a() const {
  if (const auto* p = std::get_if<BetaParams>(&params_)) return p->a;
  throw DomainError("not a Beta density");
}

double DensityModel::beta_b() const {
  if (const auto* p = std::get_if<BetaParams>(&params_)) return p->b;
  throw DomainError("not a Beta density");
}

double DensityModel::kappa() const {
  if (const auto* p = std::get_if<TiltedCosineParams>(&params_)) return p->kappa;
  throw DomainError("not a TiltedCosine density");
}

const DensityModel& DensityModel::continuous_part() const {
  if (const auto* p = std::get_if<AtomParams>(&params_)) return *p->continuous;
  throw DomainError("not an atom mixture");
}

std::string DensityModel::describe() const {
  std::ostringstream os;
  std::visit(overloaded{[&os](const BetaParams& p) { os << "Beta(" << p.a << "," << p.b << ")"; },
                        [&os](const UniformParams&) { os << "Uniform01"; },
                        [&os](const AtomParams& p) {
                          os << "AtomMixture(" << p.location << "," << p.mass << ","
                             << p.continuous->describe() << ")";
                        },
                        [&os](const TiltedCosineParams& p) {
                          os << "TiltedCosine(" << p.kappa << ")";
                        }},
             params_);
  return os.str();
}

bool operator==(const DensityModel& lhs, const DensityModel& rhs) {
  if (lhs.kind() != rhs.kind()) return false;
  switch (lhs.kind()) {
    case DensityModel::Kind::Beta:
      return lhs.beta_a() == rhs.beta_a() && lhs.beta_b() == rhs.beta_b();
    case DensityModel::Kind::Uniform01:
      return true;
    case DensityModel::Kind::TiltedCosine:
      return lhs.kappa() == rhs.kappa();
    case DensityModel::Kind::AtomMixture: {
      const auto la = lhs.atoms();
      const auto ra = rhs.atoms();
      const bool same_atoms = la.size() == ra.size() &&
                              (la.empty() || (la[0].location == ra[0].location &&
                                              la[0].mass == ra[0].mass));
      return same_atoms && lhs.continuous_part() == rhs.continuous_part();
    }
  }
  return false;
}

double pdf(const DensityModel& model, double x) { return model.pdf(x); }

std::vector<double> sample(const DensityModel& model, Rng& rng, std::size_t count) {
  return model.sample(rng, count);
}

std::vector<double> ShiftPath::equally_spaced_levels(std::size_t count) {
  if (count == 0) throw DomainError("level count must be positive");
  if (count == 1) return {0.0};
  std::vector<double> levels(count);
  for (std::size_t i = 0; i < count; ++i) {
    levels[i] = static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return levels;
}

DensityModel interpolate_source(const ShiftPath& path, double level) {
  if (!(level >= 0.0 && level <= 1.0)) {
    throw DomainError("corruption level must lie in [0,1]");
  }
  if (level == 0.0) return path.endpoint_a;
  if (level == 1.0) return path.endpoint_b;
  if (path.endpoint_a.kind() != DensityModel::Kind::Beta ||
      path.endpoint_b.kind() != DensityModel::Kind::Beta) {
    throw DomainError("interior levels require Beta endpoints");
  }
  const double a = (1.0 - level) * path.endpoint_a.beta_a() + level * path.endpoint_b.beta_a();
  const double b = (1.0 - level) * path.endpoint_a.beta_b() + level * path.endpoint_b.beta_b();
  return DensityModel::beta(a, b);
}

RatioBounds tilted_cosine_ratio_bounds(double kappa) {
  const double norm = std::cyl_bessel_i(0.0, kappa);
  return {std::exp(-kappa) / norm, std::exp(kappa) / norm};
}

}  // namespace tilt
