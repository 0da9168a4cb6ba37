// fqvlab: python bindings for the pathwise functional calculus core.
// Paths and functionals arrive as mini-spec strings (or JSON for functionals);
// bulk data returns as numpy arrays, full experiment runs as JSON text.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "fqv/calculus.hpp"
#include "fqv/errors.hpp"
#include "fqv/experiment.hpp"
#include "fqv/functional.hpp"
#include "fqv/partition.hpp"
#include "fqv/path.hpp"
#include "fqv/version.hpp"

namespace py = pybind11;

namespace {

fqv::SampledPath make_path(const std::string& spec) {
  return fqv::build_path(fqv::path_spec_from_string(spec));
}

std::size_t clamp_index(const fqv::SampledPath& path, long long k) {
  if (k < 0) return path.grid();
  const auto idx = static_cast<std::size_t>(k);
  if (idx > path.grid()) throw fqv::ParameterError("sample index beyond the grid");
  return idx;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

fqv::IntegralVariant variant_from_string(const std::string& name) {
  if (name == "along_path") return fqv::IntegralVariant::along_path;
  if (name == "along_approx") return fqv::IntegralVariant::along_approx;
  throw fqv::ParameterError("variant must be along_path or along_approx");
}

fqv::PartitionSequence ladder(const fqv::SampledPath& path, int n_min, int n_max) {
  return fqv::dyadic_sequence(path.grid(), path.horizon(), n_min, n_max);
}

}  // namespace

PYBIND11_MODULE(fqvlab, m) {
  m.doc() = "Pathwise functional calculus: quadratic variation, pathwise integrals, "
            "and an isometry for functionals of irregular paths.";

  // Translators run newest-first: the base class goes in first so the
  // ConfigError mapping wins for its subclass.
  py::register_exception<fqv::Error>(m, "FqvError", PyExc_RuntimeError);
  py::register_exception<fqv::ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("version", [] { return std::string(fqv::version()); });

  m.def(
      "generate",
      [](const std::string& path_spec) {
        const fqv::SampledPath path = make_path(path_spec);
        const std::size_t rows = path.grid() + 1;
        py::array_t<double> t(static_cast<py::ssize_t>(rows));
        py::array_t<double> w({static_cast<py::ssize_t>(rows), static_cast<py::ssize_t>(path.dim())});
        auto tb = t.mutable_unchecked<1>();
        auto wb = w.mutable_unchecked<2>();
        for (std::size_t k = 0; k < rows; ++k) {
          tb(static_cast<py::ssize_t>(k)) = path.time(k);
          for (int c = 0; c < path.dim(); ++c)
            wb(static_cast<py::ssize_t>(k), c) = path.value(k, c);
        }
        return py::make_tuple(t, w, path.label());
      },
      py::arg("path"),
      "Sample a path from a mini-spec; returns (times, values, label).");

  m.def(
      "evaluate",
      [](const std::string& functional, const std::string& path_spec, long long k) {
        const fqv::SampledPath path = make_path(path_spec);
        const fqv::Functional f = fqv::Functional::from_spec(functional);
        const fqv::Evaluator ev(f, path);
        return ev.value(clamp_index(path, k));
      },
      py::arg("functional"), py::arg("path"), py::arg("k") = -1,
      "Evaluate the functional on the stopped path at sample k (default: the horizon).");

  m.def(
      "vertical_gradient",
      [](const std::string& functional, const std::string& path_spec, long long k) {
        const fqv::SampledPath path = make_path(path_spec);
        const fqv::Functional f = fqv::Functional::from_spec(functional);
        const fqv::Evaluator ev(f, path);
        fqv::Jet jet;
        jet.reset(path.dim(), 1);
        ev.jet(clamp_index(path, k), 1, jet);
        return to_array(jet.grad);
      },
      py::arg("functional"), py::arg("path"), py::arg("k") = -1,
      "First vertical derivative of the functional at sample k.");

  m.def(
      "quadratic_variation",
      [](const std::string& path_spec, int n_min, int n_max) {
        const fqv::SampledPath path = make_path(path_spec);
        const auto levels = fqv::quadratic_variation(path, ladder(path, n_min, n_max));
        py::array_t<double> out({static_cast<py::ssize_t>(levels.size()), py::ssize_t{2}});
        auto b = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < levels.size(); ++i) {
          b(static_cast<py::ssize_t>(i), 0) = levels[i].n;
          double trace = 0.0;
          for (int c = 0; c < path.dim(); ++c) trace += levels[i].qv.total(c, c);
          b(static_cast<py::ssize_t>(i), 1) = trace;
        }
        return out;
      },
      py::arg("path"), py::arg("n_min") = 6, py::arg("n_max") = 16,
      "Quadratic variation at the horizon along a dyadic ladder; rows of (n, qv).");

  m.def(
      "follmer_integral",
      [](const std::string& functional, const std::string& path_spec, int level,
         const std::string& variant) {
        const fqv::SampledPath path = make_path(path_spec);
        const fqv::Functional f = fqv::Functional::from_spec(functional);
        const fqv::Partition partition =
            fqv::dyadic_sequence(path.grid(), path.horizon(), level, level).finest();
        return fqv::follmer_integral(f, path, partition, level, variant_from_string(variant)).value;
      },
      py::arg("functional"), py::arg("path"), py::arg("level") = 12,
      py::arg("variant") = "along_path",
      "Pathwise integral of the vertical gradient against the path, level-n dyadic sums.");

  m.def(
      "isometry_gap",
      [](const std::string& functional, const std::string& path_spec, int n_min, int n_max) {
        const fqv::SampledPath path = make_path(path_spec);
        const fqv::Functional f = fqv::Functional::from_spec(functional);
        const auto levels = fqv::isometry_gap(f, path, ladder(path, n_min, n_max));
        py::array_t<double> out({static_cast<py::ssize_t>(levels.size()), py::ssize_t{4}});
        auto b = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < levels.size(); ++i) {
          const auto idx = static_cast<py::ssize_t>(i);
          b(idx, 0) = levels[i].n;
          b(idx, 1) = levels[i].lhs;
          b(idx, 2) = levels[i].rhs;
          b(idx, 3) = levels[i].rel_gap;
        }
        return out;
      },
      py::arg("functional"), py::arg("path"), py::arg("n_min") = 6, py::arg("n_max") = 16,
      "Quadratic variation of the functional vs the integrated squared gradient; "
      "rows of (n, lhs, rhs, rel_gap).");

  m.def(
      "decompose",
      [](const std::string& functional, const std::string& path_spec, int n_min, int n_max) {
        const fqv::SampledPath path = make_path(path_spec);
        const fqv::Functional f = fqv::Functional::from_spec(functional);
        const fqv::Decomposition dec =
            fqv::rough_smooth_decompose(f, path, ladder(path, n_min, n_max));
        py::dict out;
        out["times"] = to_array(dec.times);
        out["phi"] = to_array(dec.phi);
        out["rough"] = to_array(dec.rough);
        out["smooth"] = to_array(dec.smooth);
        py::list levels;
        for (const auto& lvl : dec.levels) {
          py::dict row;
          row["n"] = lvl.n;
          row["qv_transformed"] = lvl.qv_transformed;
          row["qv_smooth"] = lvl.qv_smooth;
          row["qv_ratio"] = lvl.qv_ratio;
          levels.append(row);
        }
        out["levels"] = levels;
        out["degenerate_qv"] = dec.degenerate_qv;
        return out;
      },
      py::arg("functional"), py::arg("path"), py::arg("n_min") = 6, py::arg("n_max") = 16,
      "Split the transformed path into a gradient integral plus a remainder with "
      "vanishing quadratic variation.");

  m.def(
      "ito_isometry_mc",
      [](const std::string& functional, int seeds, std::uint64_t seed0, int level,
         std::size_t grid, double horizon) {
        const fqv::Functional f = fqv::Functional::from_spec(functional);
        const fqv::ItoMcResult r =
            fqv::ito_isometry_mc(f, seeds, seed0, level, grid, horizon);
        py::dict out;
        out["mean_lhs"] = r.mean_lhs;
        out["mean_rhs"] = r.mean_rhs;
        out["se_lhs"] = r.se_lhs;
        out["se_rhs"] = r.se_rhs;
        out["se_combined"] = r.se_combined;
        out["se_diff"] = r.se_diff;
        out["seeds"] = r.seeds;
        return out;
      },
      py::arg("functional"), py::arg("seeds") = 200, py::arg("seed0") = 1000,
      py::arg("level") = 12, py::arg("grid") = std::size_t{1} << 16, py::arg("horizon") = 1.0,
      "Monte Carlo comparison of the expected squared integral with the expected "
      "integrated squared gradient over independent driving seeds.");

  m.def(
      "check_assumptions",
      [](const std::string& functional, const std::string& path_spec, int n_min, int n_max) {
        const fqv::SampledPath path = make_path(path_spec);
        const fqv::Functional f = fqv::Functional::from_spec(functional);
        const fqv::AssumptionReport r =
            fqv::check_assumptions(f, path, ladder(path, n_min, n_max), {});
        py::dict out;
        out["lipschitz_K_hat"] = r.lipschitz_K_hat;
        out["horiz_lipschitz_C_hat"] = r.horiz_lipschitz_C_hat;
        out["samples_used"] = r.samples_used;
        py::list osc, foscill;
        for (const auto& [n, v] : r.osc) osc.append(py::make_tuple(n, v));
        for (const auto& [n, v] : r.foscill_max) foscill.append(py::make_tuple(n, v));
        out["osc"] = osc;
        out["foscill_max"] = foscill;
        return out;
      },
      py::arg("functional"), py::arg("path"), py::arg("n_min") = 6, py::arg("n_max") = 12,
      "Sampled Lipschitz-type estimates and oscillation ladders for the functional.");

  m.def(
      "run_experiment",
      [](const std::string& config_json, bool include_timestamp) {
        const fqv::ConvergenceReport report =
            fqv::run_experiment(fqv::config_from_json_text(config_json));
        return fqv::report_to_json(report, include_timestamp);
      },
      py::arg("config_json"), py::arg("include_timestamp") = true,
      "Run a full experiment from a JSON config; returns the JSON report.");

  m.def(
      "run_experiment_csv",
      [](const std::string& config_json) {
        const fqv::ConvergenceReport report =
            fqv::run_experiment(fqv::config_from_json_text(config_json));
        return fqv::report_to_csv(report);
      },
      py::arg("config_json"), "Run a full experiment from a JSON config; returns the per-level CSV.");
}
