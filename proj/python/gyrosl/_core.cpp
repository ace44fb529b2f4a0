#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gyrosl/config.hpp"
#include "gyrosl/error.hpp"
#include "gyrosl/io.hpp"
#include "gyrosl/scenarios.hpp"

namespace py = pybind11;
using namespace gyrosl;

namespace {

py::dict record_dict(const DiagnosticsRecord& r) {
  py::dict d;
  d["t"] = r.t;
  d["u1"] = r.u1;
  d["uinf"] = r.uinf;
  d["mass"] = r.mass;
  d["fmax"] = r.fmax;
  d["E_kin"] = r.E_kin;
  d["E_pot"] = r.E_pot;
  d["E_tot_dev"] = r.E_tot_dev;
  d["dmass_L"] = r.dmass_L;
  d["dmass_N"] = r.dmass_N;
  d["boundary_loss"] = r.boundary_loss;
  return d;
}

// (Nv, Nphi, Nr, Ntheta) copy of a distribution.
py::array_t<double> as_array(const DistributionField& f) {
  const Grid4D& g = f.grid;
  py::array_t<double> a({g.Nv, g.Nphi, g.Nr, g.Ntheta});
  std::copy(f.data.begin(), f.data.end(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Semi-Lagrangian drift-kinetic Vlasov solver";

  // Translators are tried newest first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<RunConfig>(m, "RunConfig")
      .def_property_readonly("scenario", [](const RunConfig& c) { return to_string(c.scenario); })
      .def_property_readonly("run_name", &RunConfig::run_name)
      .def_property_readonly("n_steps", &RunConfig::n_steps)
      .def_property_readonly("t_max", [](const RunConfig& c) { return c.t_max; })
      .def_property_readonly("shape", [](const RunConfig& c) {
        return py::make_tuple(c.grid.Nv, c.grid.Nphi, c.grid.Nr, c.grid.Ntheta);
      })
      .def("to_text", [](const RunConfig& c) { return to_text(c); })
      .def("__repr__", [](const RunConfig& c) { return "<RunConfig " + c.run_name() + ">"; });

  m.def("parse_config", &parse_config, py::arg("text"), py::arg("overrides") = std::vector<std::string>{},
        py::arg("source") = "<string>", "Parse 'key = value' text, then apply key=value overrides.");
  m.def(
      "load_config",
      [](const std::filesystem::path& path, const std::vector<std::string>& overrides) {
        return parse_config(read_text_file(path), overrides, path.string());
      },
      py::arg("path"), py::arg("overrides") = std::vector<std::string>{});

  py::class_<Simulation>(m, "Simulation")
      .def(py::init<const RunConfig&>(), py::arg("config"))
      .def("advance", &Simulation::advance, py::call_guard<py::gil_scoped_release>(), "One full time step.")
      .def(
          "advance_to_end",
          [](Simulation& s) {
            py::gil_scoped_release release;
            while (!s.finished()) s.advance();
          })
      .def("diagnostics", [](Simulation& s) { return record_dict(s.diagnostics()); })
      .def("slice",
           [](const Simulation& s, const std::string& field, int ip, int iv) {
             const Slice2D sl = s.slice(field, ip, iv);
             py::array_t<double> a({sl.r.size(), sl.theta.size()});
             std::copy(sl.values.begin(), sl.values.end(), a.mutable_data());
             return py::make_tuple(py::array(py::cast(sl.r)), py::array(py::cast(sl.theta)), a);
           },
           py::arg("field") = "f", py::arg("ip") = 0, py::arg("iv") = 0)
      .def_property_readonly("f", [](const Simulation& s) { return as_array(s.f()); })
      .def_property_readonly("f0", [](const Simulation& s) { return as_array(s.f0()); })
      .def_property_readonly("time", [](const Simulation& s) { return s.f().time; })
      .def_property_readonly("steps_done", &Simulation::steps_done)
      .def_property_readonly("total_steps", &Simulation::total_steps)
      .def_property_readonly("finished", &Simulation::finished)
      .def_property_readonly("boundary_loss", &Simulation::boundary_loss)
      .def("save_checkpoint", &Simulation::save_checkpoint)
      .def("load_checkpoint", &Simulation::load_checkpoint);

  m.def(
      "run",
      [](const RunConfig& cfg, const std::filesystem::path& out_root, bool resume) {
        RunOptions opt;
        opt.resume = resume;
        RunSummary s;
        {
          py::gil_scoped_release release;
          s = run(cfg, out_root, opt);
        }
        py::list rows;
        for (const auto& r : s.series) rows.append(record_dict(r));
        py::dict d;
        d["run_dir"] = s.run_dir;
        d["steps"] = s.steps;
        d["wall_seconds"] = s.wall_seconds;
        d["diagnostics"] = rows;
        return d;
      },
      py::arg("config"), py::arg("out_root"), py::arg("resume") = false,
      "Run to t_max writing the run directory; returns the diagnostics rows.");
  m.def("precompute_feet", &precompute_feet, py::arg("config"), py::arg("cache_dir"),
        py::call_guard<py::gil_scoped_release>());
  m.def("read_diagnostics", [](const std::filesystem::path& path) {
    py::list rows;
    for (const auto& r : read_diagnostics(path)) rows.append(record_dict(r));
    return rows;
  });
}
