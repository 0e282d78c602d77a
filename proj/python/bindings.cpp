#include <cmath>

#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "defsc/error.hpp"
#include "defsc/freeconv.hpp"
#include "defsc/harness.hpp"
#include "defsc/rmt.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw defsc::Error(defsc::ErrorCode::ConfigError, e.what());
  }
}

std::string report_text(const defsc::Report& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json values = json::array();
    for (double v : row.values) values.push_back(std::isnan(v) ? json(nullptr) : json(v));
    rows.push_back({{"seed", row.seed},
                    {"trial", row.trial},
                    {"n", row.n},
                    {"lambda", row.lambda},
                    {"e", std::isnan(row.e) ? json(nullptr) : json(row.e)},
                    {"eta", std::isnan(row.eta) ? json(nullptr) : json(row.eta)},
                    {"index", row.index},
                    {"status", row.status},
                    {"values", values}});
  }
  return json{{"columns", r.columns},
              {"rows", rows},
              {"flags", r.flags},
              {"row_success", r.row_success},
              {"ratio_q95", std::isnan(r.ratio_q95) ? json(nullptr) : json(r.ratio_q95)},
              {"rows_pass", r.rows_pass},
              {"envelope_pass", r.envelope_pass}}
      .dump();
}

}  // namespace

PYBIND11_MODULE(_defsc, m) {
  static py::exception<defsc::Error> error(m, "DefscError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const defsc::Error& e) {
      PyErr_SetObject(error.ptr(), py::make_tuple(std::string(defsc::to_string(e.code())), e.what()).ptr());
    }
  });

  py::class_<defsc::Measure>(m, "Measure")
      .def_static("uniform", &defsc::Measure::uniform)
      .def_static("dirac", &defsc::Measure::dirac, py::arg("location"))
      .def_static("jacobi", &defsc::Measure::make_jacobi, py::arg("alpha"), py::arg("beta"), py::arg("d") = std::vector<double>{1.0})
      .def_static("atomic",
                  [](const std::vector<std::pair<double, double>>& atoms) {
                    std::vector<defsc::Atom> a;
                    for (auto [loc, w] : atoms) a.push_back({loc, w});
                    return defsc::Measure::make_atomic(std::move(a));
                  })
      .def_static("from_json", [](const std::string& text) { return defsc::Measure::from_json(parse(text)); })
      .def("to_json", [](const defsc::Measure& mu) { return mu.to_json().dump(); })
      .def("density", &defsc::Measure::density)
      .def("cdf", &defsc::Measure::cdf)
      .def_property_readonly("mean", &defsc::Measure::mean);

  py::class_<defsc::FreeConvolution>(m, "FreeConvolution")
      .def(py::init<defsc::Measure, double>(), py::arg("mu"), py::arg("lambda_"))
      .def_property_readonly("l1", &defsc::FreeConvolution::l1)
      .def_property_readonly("l2", &defsc::FreeConvolution::l2)
      .def_property_readonly("lambda_", &defsc::FreeConvolution::lambda)
      .def("mfc", [](const defsc::FreeConvolution& s, double e, double eta) { return s.mfc({e, eta}); },
           py::arg("e"), py::arg("eta"))
      .def("density", &defsc::FreeConvolution::density)
      .def("integrated_density", &defsc::FreeConvolution::integrated_density)
      .def("kappa", &defsc::FreeConvolution::kappa)
      .def("classical_locations", &defsc::FreeConvolution::classical_locations);

  m.def(
      "eigenvalues",
      [](std::size_t n, double lambda, const defsc::Measure& mu, std::uint64_t seed, std::uint64_t trial) {
        defsc::EnsembleConfig c;
        c.n_size = n;
        c.lambda = lambda;
        c.mu = mu;
        c.seed = seed;
        c.trial_index = trial;
        py::gil_scoped_release release;
        return defsc::sample_spectrum(c, false).eigenvalues;
      },
      py::arg("n"), py::arg("lambda_"), py::arg("mu"), py::arg("seed") = 0, py::arg("trial") = 0);

  m.def("list_kinds", [] {
    std::vector<std::tuple<std::string, std::string, std::string>> out;
    for (const auto& k : defsc::experiment_kinds())
      out.emplace_back(std::string(defsc::to_string(k.kind)), std::string(k.statistic), std::string(k.anchor));
    return out;
  });

  m.def(
      "_run_experiment",
      [](const std::string& spec_text, std::size_t threads) {
        const auto spec = defsc::ExperimentSpec::from_json(parse(spec_text));
        defsc::Report r;
        {
          py::gil_scoped_release release;
          r = defsc::run_experiment(spec, {.threads = threads});
        }
        return report_text(r);
      },
      py::arg("spec"), py::arg("threads") = 1);
}
