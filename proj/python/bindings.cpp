#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "qmmm/convergence.hpp"
#include "qmmm/error.hpp"
#include "qmmm/mc_verify.hpp"
#include "qmmm/model_io.hpp"
#include "qmmm/solvers.hpp"
#include "qmmm/tilts.hpp"

namespace py = pybind11;
using namespace qmmm;

namespace {

// Reports cross the boundary as JSON text; the Python layer decodes them.
std::string dumps(const Json& j) { return j.dump(); }

MeasureSolution solve(const LevyTriplet& t, const std::string& kind, double q) {
  if (kind == "qmmm") return solve_qmmm(t, q);
  if (kind == "memm") return solve_memm(t);
  if (kind == "vmmm") return solve_vmmm_sc(t);
  throw Error(ErrorCode::InvalidArgument, "kind must be qmmm, memm or vmmm");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Minimal martingale measures for finite-activity exponential Levy models";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error;
  error.call_once_and_store_result([&]() { return py::exception<Error>(m, "QmmmError"); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error.get_stored();
      py::object value = exc(e.what());
      value.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(exc.ptr(), value.ptr());
    }
  });

  py::class_<LevyTriplet>(m, "Model")
      .def_property_readonly("dim", &LevyTriplet::dim)
      .def_property_readonly("T", [](const LevyTriplet& t) { return t.T; })
      .def_property_readonly("jump_mass", [](const LevyTriplet& t) { return t.K.total_mass(); })
      .def("to_json", [](const LevyTriplet& t) { return dumps(model_to_json(t)); });

  m.def("parse_model", [](const std::string& text) { return apply_quadrature_env(parse_model(text)); },
        py::arg("text"));
  m.def("load_model", [](const std::string& path) { return apply_quadrature_env(load_model(path)); },
        py::arg("path"));
  m.def("validate", [](const LevyTriplet& t) { return dumps(validation_to_json(validate(t))); });
  m.def(
      "solve",
      [](const LevyTriplet& t, const std::string& kind, double q) {
        return dumps(solution_to_json(solve(t, kind, q), t));
      },
      py::arg("model"), py::arg("kind") = "qmmm", py::arg("q") = 2.0);
  m.def("vmmm_crosscheck", [](const LevyTriplet& t) { return dumps(crosscheck_to_json(vmmm_crosscheck(t))); });
  m.def(
      "sweep",
      [](const LevyTriplet& t, std::optional<std::vector<double>> grid,
         std::optional<std::vector<double>> probes) {
        std::vector<Vector> p;
        if (probes) {
          for (double x : *probes) p.push_back(Vector::Constant(1, x));
        }
        return dumps(sweep_to_json(q_sweep(t, grid ? *grid : default_q_grid(), p)));
      },
      py::arg("model"), py::arg("grid") = py::none(), py::arg("probes") = py::none());
  m.def(
      "oracle",
      [](const LevyTriplet& t, double q) { return dumps(oracle_to_json(oracle_pq_atoms(t, q))); },
      py::arg("model"), py::arg("q") = 2.0);
  m.def(
      "check_divergence",
      [](const LevyTriplet& t, const std::string& kind, double q, int n_paths, std::uint64_t seed) {
        return dumps(mc_report_to_json(check_divergence_mc(t, solve(t, kind, q), n_paths, seed)));
      },
      py::arg("model"), py::arg("kind") = "qmmm", py::arg("q") = 2.0, py::arg("n_paths") = 100000,
      py::arg("seed") = 1);
  m.def(
      "check_martingale",
      [](const LevyTriplet& t, const std::string& kind, double q, int n_paths, std::uint64_t seed,
         const std::string& mode) {
        const auto md = mode == "weighted" ? MartingaleMode::Weighted : MartingaleMode::Direct;
        if (mode != "weighted" && mode != "direct") {
          throw Error(ErrorCode::InvalidArgument, "mode must be direct or weighted");
        }
        return dumps(mc_report_to_json(check_martingale_mc(t, solve(t, kind, q), n_paths, seed, md)));
      },
      py::arg("model"), py::arg("kind") = "qmmm", py::arg("q") = 2.0, py::arg("n_paths") = 100000,
      py::arg("seed") = 1, py::arg("mode") = "direct");
  m.def("g_q", [](double y, double q) { return g_q(y, q); }, py::arg("y"), py::arg("q"));
}
