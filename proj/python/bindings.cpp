// Python module _vism: molecules, configuration text, solves, Born checks
// and the NNLS solver.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "vism/error.hpp"
#include "vism/io.hpp"
#include "vism/parallel.hpp"

namespace py = pybind11;

namespace {

vism::RunConfig config_from(const std::string& text) {
  vism::RunConfig cfg;
  std::istringstream in(text);
  vism::parse_config(in, cfg, "<python>");
  cfg.validate();
  return cfg;
}

py::array_t<double> to_array(const vism::ScalarField& f) {
  const auto& d = f.grid().dims;
  py::array_t<double> out({d[0], d[1], d[2]});
  std::copy(f.data().begin(), f.data().end(), out.mutable_data());
  return out;
}

py::dict report_dict(const vism::EnergyReport& r) {
  py::dict d;
  d["repulsive"] = r.repulsive;
  d["attractive"] = r.attractive;
  d["polar"] = r.polar;
  d["total"] = r.total;
  d["tv"] = r.tv;
  d["pressure_volume"] = r.pressure_volume;
  d["fixed_charge"] = r.fixed_charge;
  d["dielectric"] = r.dielectric;
  d["ionic"] = r.ionic;
  return d;
}

py::dict solve(const vism::Molecule& m, const std::string& config, bool fields) {
  const vism::RunConfig cfg = config_from(config);
  vism::Solution s;
  {
    py::gil_scoped_release release;
    s = vism::self_consistent_solve(m, cfg.params, cfg.coupling, cfg.evolution);
  }
  py::dict d;
  d["report"] = report_dict(s.report);
  d["converged"] = s.converged;
  d["outer_iterations"] = s.outer_iterations;
  d["evolution_steps"] = s.evolution_steps;
  d["pb_solves"] = s.pb_solves;
  py::list trace;
  for (const auto& t : s.trace) trace.append(py::make_tuple(t.outer_iter, t.total, t.max_du, t.pb_residual));
  d["trace"] = trace;
  if (fields) {
    const vism::Grid& g = s.u.u.grid();
    d["origin"] = g.origin;
    d["h"] = g.h;
    d["u"] = to_array(s.u.u);
    d["psi"] = to_array(s.psi.psi);
  }
  return d;
}

py::dict born(const std::string& config) {
  vism::RunConfig cfg = config_from(config);
  cfg.born.pb = cfg.coupling.pb;
  vism::BornStudy study;
  {
    py::gil_scoped_release release;
    study = vism::born_refinement(cfg.born, cfg.params);
  }
  py::list pts;
  for (const auto& p : study.points) {
    py::dict d;
    d["h"] = p.h;
    d["energy"] = p.energy;
    d["analytic"] = p.analytic;
    d["rel_error"] = p.rel_error;
    pts.append(d);
  }
  py::dict out;
  out["points"] = pts;
  out["order"] = study.order;
  return out;
}

}  // namespace

PYBIND11_MODULE(_vism, mod) {
  mod.doc() = "Variational implicit-solvent free energies on a grid";

  static py::exception<vism::Error> error(mod, "VismError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const vism::Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::class_<vism::Atom>(mod, "Atom")
      .def(py::init([](vism::Vec3 position, double charge, double radius, std::string type) {
             return vism::Atom{position, charge, radius, std::move(type)};
           }),
           py::arg("position"), py::arg("charge"), py::arg("radius"), py::arg("type"))
      .def_readwrite("position", &vism::Atom::position)
      .def_readwrite("charge", &vism::Atom::charge)
      .def_readwrite("radius", &vism::Atom::radius)
      .def_readwrite("type", &vism::Atom::type)
      .def("__repr__", [](const vism::Atom& a) {
        std::ostringstream os;
        os << "Atom(" << a.type << ", q=" << a.charge << ", r=" << a.radius << ")";
        return os.str();
      });

  py::class_<vism::Molecule>(mod, "Molecule")
      .def(py::init<>())
      .def(py::init([](std::vector<vism::Atom> atoms) { return vism::Molecule{std::move(atoms)}; }))
      .def_readwrite("atoms", &vism::Molecule::atoms)
      .def("total_charge", &vism::Molecule::total_charge)
      .def("__len__", [](const vism::Molecule& m) { return m.atoms.size(); });

  mod.def("read_molecule", &vism::read_molecule, py::arg("path"));
  mod.def(
      "parse_molecule",
      [](const std::string& text) {
        std::istringstream in(text);
        return vism::parse_molecule(in, "<python>");
      },
      py::arg("text"));
  mod.def(
      "effective_config", [](const std::string& text) {
        std::ostringstream os;
        vism::write_config(os, config_from(text));
        return os.str();
      },
      py::arg("text") = "");

  mod.def("solve", &solve, py::arg("molecule"), py::arg("config") = "", py::arg("fields") = false,
          "Self-consistent solve; config is `key = value` text.");
  mod.def("born", &born, py::arg("config") = "");
  mod.def("born_energy_analytical", &vism::born_energy_analytical, py::arg("q"), py::arg("R"),
          py::arg("eps_m") = 1.0, py::arg("eps_s") = 80.0, py::arg("k_e") = vism::units::coulomb);
  mod.def(
      "nnls",
      [](const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
        const vism::NNLSResult r = vism::nnls(A, b);
        return py::make_tuple(r.x, r.objective);
      },
      py::arg("A"), py::arg("b"));
  mod.def(
      "spread_charges",
      [](const vism::Molecule& m, double h, double pad) {
        const vism::Grid g = vism::build_grid(m, h, pad);
        return to_array(vism::spread_charges(m, g).values);
      },
      py::arg("molecule"), py::arg("h") = 0.5, py::arg("pad") = 2.0);
  mod.def("set_threads", &vism::parallel::set_threads, py::arg("n"));
}
