#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <vector>

#include <nlohmann/json.hpp>

#include "tilt/app/config.hpp"
#include "tilt/app/verify.hpp"
#include "tilt/densities.hpp"
#include "tilt/errors.hpp"
#include "tilt/experiments.hpp"
#include "tilt/features.hpp"
#include "tilt/population.hpp"
#include "tilt/rng.hpp"
#include "tilt/solvers.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace tilt;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
  return std::vector<double>(a.data(), a.data() + a.size());
}

Array to_array(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

template <class F>
Array map_array(const Array& xs, F&& f) {
  std::vector<double> in = to_vector(xs);
  for (double& x : in) x = f(x);
  return to_array(in);
}

json trial_to_json(const TrialResult& r) {
  return {{"experiment", r.experiment}, {"method", r.method},   {"level_or_L", r.level_or_L},
          {"n", r.n},                   {"m", r.m},             {"lambda", r.lambda},
          {"d_f", r.d_f},               {"d_b", r.d_b},         {"target_mse", r.target_mse},
          {"seed", r.seed},             {"trial", r.trial},     {"status", r.status}};
}

std::string run_json(const std::string& config, int threads) {
  const ExperimentConfig cfg = app::config_from_json(json::parse(config));
  SweepResult sweep;
  json extra = json::object();
  switch (cfg.experiment) {
    case ExperimentKind::LinearShiftSweep:
      sweep = run_linear_shift_sweep(cfg, threads);
      break;
    case ExperimentKind::LambdaSensitivity:
      sweep = run_lambda_sensitivity(cfg, threads);
      break;
    case ExperimentKind::PointMassRate: {
      const RateReport rep = run_pointmass_rate(cfg, threads);
      sweep = rep.sweep;
      extra["tilt_slope"] = rep.tilt_fit.slope;
      extra["erm_slope"] = rep.erm_fit.slope;
      extra["warnings"] = rep.warnings;
      break;
    }
    case ExperimentKind::BoundedRatioSweep: {
      const BoundedRatioResult res = run_bounded_ratio_sweep(cfg, threads);
      sweep = res.sweep;
      json err = json::array();
      for (const auto& e : res.err_lambda) {
        err.push_back({{"d_f", e.d_f}, {"d_b", e.d_b}, {"lambda", e.lambda}, {"trial", e.trial},
                       {"scaled_err_lambda_sq", e.scaled_err_lambda_sq}});
      }
      extra["err_lambda"] = err;
      break;
    }
  }
  json rows = json::array();
  for (const auto& r : sweep.trials) rows.push_back(trial_to_json(r));
  extra["trials"] = rows;
  extra["config"] = app::config_to_json(cfg);
  // NaN is not valid JSON; nlohmann writes null, which the wrapper maps back.
  return extra.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint tilted-ridge estimation under covariate shift";

  // Translators run newest first, so the subclass is registered last.
  py::register_exception<Error>(m, "TiltError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<DensityModel>(m, "Density")
      .def_static("beta", &DensityModel::beta, py::arg("a"), py::arg("b"))
      .def_static("uniform", &DensityModel::uniform)
      .def_static("tilted_cosine", &DensityModel::tilted_cosine, py::arg("kappa"))
      .def_static("atom_mixture", &DensityModel::atom_mixture, py::arg("location"),
                  py::arg("atom_mass"), py::arg("continuous"))
      .def("pdf", [](const DensityModel& d, const Array& xs) {
        return map_array(xs, [&](double x) { return d.pdf(x); });
      })
      .def("sample",
           [](const DensityModel& d, std::size_t count, std::uint64_t seed) {
             Rng rng(seed);
             return to_array(d.sample(rng, count));
           },
           py::arg("count"), py::arg("seed"))
      .def_property_readonly("atom_mass", &DensityModel::total_atom_mass)
      .def("to_json", [](const DensityModel& d) { return app::density_to_json(d).dump(); })
      .def("__repr__", &DensityModel::describe);

  py::class_<FeatureMap>(m, "FeatureMap")
      .def_static("shifted_legendre", &FeatureMap::shifted_legendre, py::arg("degree"))
      .def_static("sine", &FeatureMap::sine, py::arg("num_frequencies"))
      .def_static("fourier", &FeatureMap::fourier, py::arg("dimension"))
      .def_static("gaussian_rbf", &FeatureMap::gaussian_rbf, py::arg("centers"),
                  py::arg("bandwidth"))
      .def_static("gaussian_rbf_uniform", &FeatureMap::gaussian_rbf_uniform, py::arg("count"),
                  py::arg("bandwidth"))
      .def_static("zero", &FeatureMap::zero)
      .def_property_readonly("dim", &FeatureMap::output_dim)
      .def("design_matrix",
           [](const FeatureMap& f, const Array& xs) {
             const std::vector<double> v = to_vector(xs);
             return f.design_matrix(v);
           })
      .def("evaluate",
           [](const FeatureMap& f, const Eigen::VectorXd& coeffs, const Array& xs) {
             if (coeffs.size() != f.output_dim()) throw DomainError("coefficient length mismatch");
             return map_array(xs, [&](double x) { return evaluate_expansion(f, coeffs, x); });
           })
      .def("__repr__", &FeatureMap::describe);

  m.def(
      "tilt_fit",
      [](const Array& xs, const Array& ys, const Array& target_xs, const FeatureMap& fmap,
         const FeatureMap& bmap, double lam, double ridge_f, double ridge_b) {
        const LabeledSample src{to_vector(xs), to_vector(ys)};
        const UnlabeledSample tgt{to_vector(target_xs)};
        const TiltFit fit = tilt::tilt_fit(src, tgt, fmap, bmap, TiltConfig{lam, ridge_f, ridge_b});
        py::dict out;
        out["theta"] = fit.theta;
        out["gamma"] = fit.gamma;
        out["objective"] = fit.source_objective;
        out["condition"] = fit.condition_estimate;
        return out;
      },
      py::arg("xs"), py::arg("ys"), py::arg("target_xs"), py::arg("fmap"), py::arg("bmap"),
      py::arg("lam"), py::arg("ridge_f") = 1e-8, py::arg("ridge_b") = 1e-8,
      "Minimizer (theta, gamma) of the joint tilted ridge objective.");

  m.def(
      "weighted_ridge_fit",
      [](const Array& xs, const Array& ys, const FeatureMap& fmap, const Array& weights,
         double ridge) {
        const LabeledSample src{to_vector(xs), to_vector(ys)};
        const std::vector<double> w = to_vector(weights);
        return tilt::weighted_ridge_fit(src, fmap, w, ridge);
      },
      py::arg("xs"), py::arg("ys"), py::arg("fmap"), py::arg("weights"), py::arg("ridge") = 1e-8);

  m.def(
      "exact_relative_weights",
      [](const DensityModel& p, const DensityModel& q, double lam, const Array& xs) {
        const std::vector<double> v = to_vector(xs);
        return to_array(tilt::exact_relative_weights(p, q, lam, v));
      },
      py::arg("p"), py::arg("q"), py::arg("lam"), py::arg("xs"));

  py::class_<PopulationContext>(m, "PopulationContext")
      .def(py::init([](const DensityModel& p, const DensityModel& q, double lam, int points,
                       const std::string& rule) {
             QuadRule r;
             if (rule == "trapezoid") r = QuadRule::Trapezoid;
             else if (rule == "gauss_legendre") r = QuadRule::GaussLegendre;
             else throw ConfigError("rule", "expected trapezoid or gauss_legendre");
             return PopulationContext(p, q, lam, points, r);
           }),
           py::arg("p"), py::arg("q"), py::arg("lam"),
           py::arg("quad_points") = PopulationContext::kDefaultTrapezoidPoints,
           py::arg("rule") = "trapezoid")
      .def_property_readonly("lam", &PopulationContext::lambda)
      .def("v_weight",
           [](const PopulationContext& c, const Array& xs) {
             return map_array(xs, [&](double x) { return v_weight(c, x); });
           })
      .def("w_weight", [](const PopulationContext& c, const Array& xs) {
        return map_array(xs, [&](double x) { return w_weight(c, x); });
      });

  m.def(
      "verify",
      [](const std::string& kind, std::size_t cases, std::uint64_t seed, double tol) {
        return app::run_verify_suite(kind, cases, seed, tol).to_json().dump();
      },
      py::arg("kind"), py::arg("cases") = 50, py::arg("seed") = 20260101, py::arg("tol") = 1e-8,
      "JSON report of one randomized identity suite.");

  m.def("_run_json", &run_json, py::arg("config"), py::arg("threads") = 1,
        py::call_guard<py::gil_scoped_release>());

  m.def(
      "_default_config_json",
      [](const std::string& kind) {
        return app::config_to_json(ExperimentConfig::defaults(app::parse_experiment_kind(kind)))
            .dump();
      },
      py::arg("experiment"));

  m.def("stream_seed", &stream_seed, py::arg("seed"), py::arg("cell"), py::arg("trial"));
}
