#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hkends/estimates.hpp"
#include "hkends/pipeline.hpp"
#include "hkends/profiles.hpp"
#include "hkends/scenario.hpp"
#include "hkends/solver.hpp"

namespace py = pybind11;
using namespace hkends;

namespace {

DecayModel model_from(const std::string& s) {
  if (s == "power") return DecayModel::Power;
  if (s == "power-log") return DecayModel::PowerLog;
  if (s == "log-class") return DecayModel::LogClass;
  if (s == "auto") return DecayModel::Auto;
  throw Error(ErrorKind::InvalidArgument, "unknown decay model '" + s + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Heat kernel estimates on manifolds with ends";

  static py::handle error = py::exception<Error>(m, "Error", PyExc_RuntimeError).release();
  static py::handle stage_error = py::exception<StageError>(m, "StageError", error.ptr()).release();
  py::register_exception_translator([](std::exception_ptr p) {
    const auto raise = [](py::handle type, const Error& e, const std::string* stage) {
      py::object inst = py::reinterpret_borrow<py::object>(type)(e.what());
      inst.attr("kind") = to_string(e.kind());
      inst.attr("stage") = stage ? py::object(py::str(*stage)) : py::object(py::none());
      PyErr_SetObject(type.ptr(), inst.ptr());
    };
    try {
      if (p) std::rethrow_exception(p);
    } catch (const StageError& e) {
      raise(stage_error, e, &e.stage());
    } catch (const Error& e) {
      raise(error, e, nullptr);
    }
  });

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("name", &Scenario::name)
      .def_readonly("description", &Scenario::description)
      .def_readwrite("dx", &Scenario::dx)
      .def_readwrite("r_max", &Scenario::r_max)
      .def_readwrite("seed", &Scenario::seed)
      .def_readwrite("implicit", &Scenario::implicit)
      .def_readwrite("epsilon", &Scenario::epsilon)
      .def_property_readonly("series_names",
                             [](const Scenario& s) {
                               std::vector<std::string> out;
                               for (const auto& x : s.series) out.push_back(x.name);
                               return out;
                             })
      .def("to_json", [](const Scenario& s) { return to_json(s); })
      .def("variants", [](const Scenario& s) { return expand_variants(s); })
      .def("__repr__", [](const Scenario& s) { return "<Scenario " + s.name + ">"; });

  m.def("list_scenarios", &list_scenarios);
  m.def("describe", py::overload_cast<const std::string&>(&describe), py::arg("name"));
  m.def("describe_scenario", py::overload_cast<const Scenario&>(&describe), py::arg("scenario"));
  m.def("load_scenario", &load_scenario, py::arg("name_or_path"));
  m.def("parse_scenario", &parse_scenario, py::arg("json_text"));

  py::class_<DecayFit>(m, "DecayFit")
      .def_readonly("a", &DecayFit::a)
      .def_readonly("b", &DecayFit::b)
      .def_readonly("log_c", &DecayFit::log_c)
      .def_readonly("residual", &DecayFit::residual)
      .def_readonly("t_min", &DecayFit::t_min)
      .def_readonly("t_max", &DecayFit::t_max)
      .def_readonly("samples", &DecayFit::samples)
      .def_readonly("power_residual", &DecayFit::power_residual)
      .def_readonly("log_residual", &DecayFit::log_residual)
      .def_property_readonly("model", [](const DecayFit& f) { return std::string(to_string(f.model)); });

  m.def(
      "fit_decay",
      [](const std::vector<double>& t, const std::vector<double>& p, const std::string& model) {
        return fit_decay(t, p, model_from(model));
      },
      py::arg("t"), py::arg("p"), py::arg("model") = "power");

  py::class_<CriterionResult>(m, "Criterion")
      .def_readonly("name", &CriterionResult::name)
      .def_readonly("passed", &CriterionResult::passed)
      .def_readonly("value", &CriterionResult::value)
      .def_readonly("detail", &CriterionResult::detail);

  py::class_<SeriesResult>(m, "Series")
      .def_property_readonly("name", [](const SeriesResult& s) { return s.spec.name; })
      .def_readonly("t", &SeriesResult::t)
      .def_readonly("p", &SeriesResult::p)
      .def_readonly("stderr", &SeriesResult::stderr_)
      .def_readonly("fitted", &SeriesResult::fitted)
      .def_readonly("fit", &SeriesResult::fit)
      .def_readonly("auto_fit", &SeriesResult::auto_fit)
      .def_readonly("truncation_drift", &SeriesResult::truncation_drift);

  py::class_<VerificationReport>(m, "Report")
      .def_readonly("scenario", &VerificationReport::scenario)
      .def_readonly("cells", &VerificationReport::cells)
      .def_readonly("seed", &VerificationReport::seed)
      .def_readonly("series", &VerificationReport::series)
      .def_readonly("criteria", &VerificationReport::criteria)
      .def_property_readonly("predicted",
                             [](const VerificationReport& r) -> py::object {
                               if (!r.prediction_available) return py::none();
                               return py::str(r.predicted.describe());
                             })
      .def_property_readonly("predicted_exponent",
                             [](const VerificationReport& r) -> py::object {
                               if (!r.prediction_available) return py::none();
                               return py::float_(r.predicted.a);
                             })
      .def_property_readonly("log_class", [](const VerificationReport& r) { return r.predicted.log_class; })
      .def_property_readonly("sandwich_coverage", [](const VerificationReport& r) { return r.sandwich.coverage; })
      .def_property_readonly("sandwich_ratio", [](const VerificationReport& r) { return r.sandwich.max_ratio; })
      .def_property_readonly("band_ratios",
                             [](const VerificationReport& r) {
                               std::vector<double> out;
                               for (const auto& b : r.profile.bands) out.push_back(b.ratio());
                               return out;
                             })
      .def_property_readonly("passed", &VerificationReport::passed)
      .def("summary", &VerificationReport::summary);

  m.def(
      "run_pipeline",
      [](const Scenario& s, const std::string& out_dir, bool envelope, bool solve, bool fit, bool compare) {
        PipelineOptions o;
        o.out_dir = out_dir;
        o.envelope = envelope;
        o.solve = solve;
        o.fit = fit;
        o.compare = compare;
        py::gil_scoped_release release;
        return run_pipeline(s, o);
      },
      py::arg("scenario"), py::arg("out_dir") = "", py::arg("envelope") = true, py::arg("solve") = true,
      py::arg("fit") = true, py::arg("compare") = true);

  m.def(
      "cone_profile",
      [](double aperture, double edge_angle, const std::string& edges, double r, double theta) {
        if (edges.size() != 2) throw Error(ErrorKind::InvalidArgument, "edges must be two of D/N");
        return cone_profile(ConeEnd{aperture, edge_angle, parse_bc(edges[0]), parse_bc(edges[1])}, r, theta);
      },
      py::arg("aperture"), py::arg("edge_angle"), py::arg("edges"), py::arg("r"), py::arg("theta"));
  m.def("exterior_parabola_profile", &exterior_parabola_profile, py::arg("x1"), py::arg("x2"));
}
