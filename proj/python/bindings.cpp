// Python module: the main operations, with JSON documents passed as dicts.
#include "spinbell/bell.hpp"
#include "spinbell/fit.hpp"
#include "spinbell/harness.hpp"
#include "spinbell/model.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace spinbell;
using nlohmann::json;

namespace {

// dicts cross the boundary as JSON text; json.dumps/loads keep the types exact
json from_py(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::dict run(const py::object& config, std::optional<int> workers, std::optional<std::uint64_t> seed,
             std::optional<std::string> mode) {
  CliOverrides over;
  over.workers = workers;
  over.seed = seed;
  over.mode = mode;
  const ExperimentConfig cfg = parse_config(apply_overrides(from_py(config), over));
  SweepResult r;
  {
    py::gil_scoped_release release;
    r = run_experiment(cfg);
  }
  py::dict out;
  out["result"] = to_py(result_json(r, cfg));
  out["csv"] = result_csv(r);
  py::dict tables;
  for (const auto& [suffix, content] : r.tables) tables[py::str(suffix)] = content;
  out["tables"] = tables;
  return out;
}

py::dict report(const py::object& result_doc) {
  const Report rep = compare(from_py(result_doc));
  py::list rows;
  for (const auto& row : rep.rows) {
    py::dict d;
    d["table"] = row.table;
    d["axes"] = to_py(json(row.axes));
    d["computed"] = row.computed;
    d["published"] = row.published;
    d["deviation"] = row.deviation;
    d["tolerance"] = row.tolerance;
    d["flagged"] = row.flagged;
    rows.append(d);
  }
  py::dict out;
  out["rows"] = rows;
  out["flags"] = rep.flags();
  out["skipped"] = rep.skipped;
  out["markdown"] = rep.markdown();
  return out;
}

py::dict chsh(const Vec& psi) {
  CHSHResult r;
  try {
    r = chsh_maximize(psi);
  } catch (const DegenerateDirection& e) {
    // no unique observables; the maximum is still meaningful
    py::dict d;
    d["value"] = e.value;
    d["angles"] = e.angles;
    d["degenerate"] = true;
    return d;
  }
  py::dict d;
  d["value"] = r.value;
  d["angles"] = r.angles;
  d["degenerate"] = false;
  d["A"] = r.observables.A;
  d["A_prime"] = r.observables.A_prime;
  d["B"] = r.observables.B;
  d["B_prime"] = r.observables.B_prime;
  return d;
}

py::tuple levels(const std::string& system, double bmin_T, double bmax_T, int n) {
  std::function<HamiltonianModel(double)> builder;
  if (system == "dimer")
    builder = [](double b) {
      DimerParams p;
      p.Bz_T = b;
      return build_dimer(p);
    };
  else if (system == "trimer")
    builder = [](double b) {
      TrimerParams p;
      p.Bz_T = b;
      return build_trimer(p);
    };
  else
    throw std::invalid_argument("system must be dimer or trimer");
  const LevelTable t = level_diagram(builder, bmin_T, bmax_T, n);
  Eigen::MatrixXd e(t.energies.size(), t.energies.empty() ? 0 : t.energies.front().size());
  for (std::size_t k = 0; k < t.energies.size(); ++k) e.row(k) = t.energies[k].transpose() / units::MHz;
  return py::make_tuple(t.fields_T, e);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spin-qudit Bell tests: sweeps, CHSH/CGLMP values, decay fits";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FitRejected>(m, "FitRejected", PyExc_RuntimeError);

  m.def("run", &run, py::arg("config"), py::arg("workers") = py::none(), py::arg("seed") = py::none(),
        py::arg("mode") = py::none(), "Run one experiment config; returns the result document, CSV and extra tables.");
  m.def("report", &report, py::arg("result"), "Compare a result document with the published tables.");
  m.def(
      "config_hash", [](const py::object& c) { return config_hash(from_py(c)); }, py::arg("config"));
  m.def("chsh_maximize", &chsh, py::arg("psi"), "Maximal CHSH value of a qubit (x) qudit pure state.");
  m.def(
      "reducibility",
      [](const Vec& psi) {
        const Reducibility r = reducibility_check(psi);
        return py::make_tuple(r.reducible, r.witness);
      },
      py::arg("psi"));
  m.def(
      "cglmp_ideal", [] { return cglmp_functional(cglmp_ideal_probabilities()); },
      "CGLMP value of the maximally entangled d = 4 state with the optimal settings.");
  m.def(
      "cglmp_value",
      [](const std::vector<Mat>& rhos) {
        if (rhos.size() != 4) throw std::invalid_argument("need four density matrices");
        return cglmp_functional(cglmp_probabilities({rhos[0], rhos[1], rhos[2], rhos[3]}));
      },
      py::arg("rhos"));
  m.def(
      "fit_decay",
      [](const std::vector<double>& tau_us, const std::vector<double>& amplitude) {
        if (tau_us.size() != amplitude.size()) throw std::invalid_argument("tau and amplitude differ in length");
        std::vector<std::pair<double, double>> d;
        for (std::size_t i = 0; i < tau_us.size(); ++i) d.push_back({tau_us[i], amplitude[i]});
        const DecayFit f = fit_decay(d);
        py::dict out;
        out["M0"] = f.M0;
        out["T2_us"] = f.T2_us;
        out["residual"] = f.residual;
        out["points"] = f.points;
        return out;
      },
      py::arg("tau_us"), py::arg("amplitude"));
  m.def("level_diagram", &levels, py::arg("system"), py::arg("bmin_T"), py::arg("bmax_T"), py::arg("points"),
        "Fields (T) and ascending energies (MHz).");
  m.attr("__version__") = code_version();
}
