#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <sstream>

#include "recallsurv/cli.hpp"
#include "recallsurv/dataset_io.hpp"
#include "recallsurv/diagnostics.hpp"
#include "recallsurv/error.hpp"
#include "recallsurv/json_io.hpp"
#include "recallsurv/nonparametric.hpp"
#include "recallsurv/parametric.hpp"
#include "recallsurv/simulate.hpp"

namespace py = pybind11;
using namespace recallsurv;

namespace {

// Datasets cross the boundary as a dict of equal-length columns.
using Columns = std::map<std::string, std::vector<double>>;

Columns to_columns(const Dataset& data) {
  Columns c;
  for (const char* k : {"s", "delta", "epsilon", "v", "m", "d"}) c[k].reserve(data.size());
  bool has_t = !data.empty();
  for (const auto& r : data) {
    c["s"].push_back(r.s);
    c["delta"].push_back(r.delta);
    c["epsilon"].push_back(r.epsilon);
    c["v"].push_back(r.v);
    c["m"].push_back(r.m);
    c["d"].push_back(r.d);
    has_t = has_t && r.t.has_value();
  }
  if (has_t)
    for (const auto& r : data) c["t"].push_back(*r.t);
  return c;
}

Dataset from_columns(const Columns& c) {
  for (const char* k : {"s", "delta", "epsilon", "v", "m", "d"})
    if (!c.count(k)) throw InvalidRecord(std::string("missing column '") + k + "'");
  const size_t n = c.at("s").size();
  for (const auto& [k, col] : c)
    if (col.size() != n) throw InvalidRecord("column '" + k + "' has a different length");
  Dataset data(n);
  for (size_t i = 0; i < n; ++i) {
    auto& r = data[i];
    r.id = static_cast<long>(i + 1);
    r.s = c.at("s")[i];
    r.delta = static_cast<int>(c.at("delta")[i]);
    r.epsilon = static_cast<int>(c.at("epsilon")[i]);
    r.v = c.at("v")[i];
    r.m = static_cast<int>(c.at("m")[i]);
    r.d = c.at("d")[i];
    if (c.count("t")) r.t = c.at("t")[i];
  }
  validate_dataset(data);
  return data;
}

Scenario scenario_from(const std::string& spec) {
  if (is_preset(spec)) return preset_scenario(spec);
  const Json j = Json::parse(spec, nullptr, false);
  if (j.is_discarded()) throw DomainError("unknown scenario '" + spec + "'");
  return j.get<Scenario>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Event-age estimation from recall and current status data";
  m.attr("__version__") = kToolVersion;

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  m.def("presets", &preset_names);
  m.def(
      "simulate",
      [](const std::string& scenario, std::optional<int> n, std::uint64_t seed) {
        Scenario sc = scenario_from(scenario);
        if (n) sc.n = *n;
        sc.seed = seed;
        return to_columns(generate(sc));
      },
      py::arg("scenario"), py::arg("n") = py::none(), py::arg("seed") = 0);
  m.def("read_csv", [](const std::string& path) { return to_columns(read_dataset_csv(path)); });
  m.def("write_csv", [](const std::string& path, const Columns& c) { write_dataset_csv(path, from_columns(c)); });
  m.def(
      "fit",
      [](const Columns& c, const std::string& kind) {
        const Dataset data = from_columns(c);
        py::gil_scoped_release release;
        return Json(fit_mle(data, parse_likelihood_kind(kind))).dump();
      },
      py::arg("data"), py::arg("kind") = "partial");
  m.def(
      "npfit",
      [](const Columns& c, const std::vector<double>& knots, const std::string& kind) {
        const Dataset data = from_columns(c);
        py::gil_scoped_release release;
        const NpFit fit = kind == "binary" ? fit_binary_amle(data, knots) : fit_amle(data, knots);
        return Json(fit).dump();
      },
      py::arg("data"), py::arg("knots") = std::vector<double>{0.0, 3.0, 6.0, 9.0}, py::arg("kind") = "partial");
  m.def(
      "gof",
      [](const Columns& c, const std::string& fit_json) {
        return Json(gof_chisq(from_columns(c), Json::parse(fit_json).get<ParametricFit>())).dump();
      },
      py::arg("data"), py::arg("fit"));
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int status = run_cli(args, out, err);
        return py::make_tuple(status, out.str(), err.str());
      },
      py::arg("args"));
}
