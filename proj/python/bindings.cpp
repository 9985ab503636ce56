#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mspflow/acceptance.hpp"
#include "mspflow/config.hpp"
#include "mspflow/errors.hpp"
#include "mspflow/experiments.hpp"

namespace py = pybind11;
using namespace mspflow;

namespace {

py::dict state_dict(const State& s) {
  py::dict d;
  d["t"] = s.t;
  d["sw"] = s.sw;
  d["sn"] = s.sn;
  d["pw"] = s.pw;
  d["pn"] = s.pn;
  d["ut"] = s.ut;
  d["xi"] = s.xi;
  return d;
}

py::list trajectory_list(const Trajectory& t) {
  py::list out;
  for (const State& s : t.states) out.append(state_dict(s));
  return out;
}

py::list report_list(const RunReport& r) {
  py::list out;
  for (const StepRecord& s : r.steps) {
    py::dict d;
    d["step"] = s.step;
    d["t"] = s.t;
    d["substeps"] = s.substeps;
    d["conservation_w"] = s.conservation_w;
    d["conservation_n"] = s.conservation_n;
    d["dual_consistency"] = s.dual_consistency;
    d["sw_min"] = s.sw_min;
    d["sw_max"] = s.sw_max;
    d["bounds_violations"] = s.bounds_violations;
    d["e_s"] = s.e_s;
    d["flux_sign"] = s.flux_sign;
    out.append(d);
  }
  return out;
}

RunConfig configured(const std::string& path, const std::string& text) {
  RunConfig c = !path.empty() ? load_config(path) : parse_config(text);
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Fine-scale and multiscale mixed IMPES two-phase flow solvers";

  // Translators registered later are tried first, so the base class goes first.
  py::register_exception<Error>(m, "SolverError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IngestionError>(m, "IngestionError", PyExc_ValueError);

  py::class_<RunConfig>(m, "RunConfig")
      .def_static(
          "load", [](const std::string& path) { return configured(path, ""); }, py::arg("path"))
      .def_static(
          "parse", [](const std::string& text) { return configured("", text); }, py::arg("text"))
      .def_property_readonly("nx", [](const RunConfig& c) { return c.grid.nx; })
      .def_property_readonly("ny", [](const RunConfig& c) { return c.grid.ny; })
      .def_property_readonly("block", [](const RunConfig& c) { return c.grid.block; })
      .def_property_readonly("dt", [](const RunConfig& c) { return c.time.dt; })
      .def_property_readonly("T", [](const RunConfig& c) { return c.time.T; })
      .def_property_readonly("bases", [](const RunConfig& c) { return c.ms.label(); });

  m.def(
      "permeability",
      [](const RunConfig& c) {
        const Problem p = make_problem(c);
        Eigen::MatrixXd k(p.grid.ny(), p.grid.nx());
        for (int cell = 0; cell < p.grid.num_cells(); ++cell) {
          k(p.grid.cell_j(cell), p.grid.cell_i(cell)) = p.medium.kappa[cell];
        }
        return k;
      },
      py::arg("config"), "Permeability as an (ny, nx) array, row j = y index.");

  m.def(
      "run_fine",
      [](const RunConfig& c, bool monitor) {
        RunResult r;
        {
          py::gil_scoped_release release;
          const Problem p = make_problem(c);
          r = run_fine(p, c.time, initial_state(p, c.initial_saturation()), {monitor});
        }
        py::dict d;
        d["states"] = trajectory_list(r.trajectory);
        d["report"] = report_list(r.report);
        return d;
      },
      py::arg("config"), py::arg("monitor") = true);

  m.def(
      "run_ms",
      [](const RunConfig& c, const std::string& bases, bool monitor) {
        MsRunResult r;
        {
          py::gil_scoped_release release;
          const Problem p = make_problem(c);
          MsRunOptions o;
          o.monitor = monitor;
          r = run_ms(p, c.time, initial_state(p, c.initial_saturation()), basis_for(c, bases), o);
        }
        py::dict d;
        d["states"] = trajectory_list(r.trajectory);
        d["report"] = report_list(r.report);
        d["basis_size"] = r.space.size();
        d["enrichment_residuals"] = r.report.enrichment_residuals;
        return d;
      },
      py::arg("config"), py::arg("bases") = "", py::arg("monitor") = true);

  m.def(
      "compare",
      [](const RunConfig& c, const std::string& bases) {
        CaseResult r;
        {
          py::gil_scoped_release release;
          const RunResult ref = reference_run(c);
          r = run_case(c, {bases.empty() ? c.ms.label() : bases, 0, 0.0, bases}, ref.trajectory);
        }
        py::dict d;
        d["t"] = r.series.t;
        d["e_s"] = r.series.e_s;
        d["flux_sign"] = r.series.flux_sign;
        return d;
      },
      py::arg("config"), py::arg("bases") = "", "e_s and flux sign over time against a fine reference.");
}
