// Python extension: structured values cross the boundary as JSON text and
// are decoded on the Python side.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "agcl/compile.hpp"
#include "agcl/error.hpp"
#include "agcl/harness.hpp"
#include "agcl/ltlf.hpp"
#include "agcl/selftest.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

struct CompiledDfa {
  agcl::PropositionSet ap;
  agcl::Formula formula;
  agcl::Dfa dfa;
};

CompiledDfa compile(const std::string& formula, const std::vector<std::string>& ap) {
  agcl::PropositionSet props(ap);
  auto f = agcl::parse_ltlf(formula, props);
  auto dfa = agcl::compile_dfa(f, props);
  return CompiledDfa{std::move(props), std::move(f), std::move(dfa)};
}

std::vector<agcl::Symbol> to_trace(const CompiledDfa& c, const std::vector<std::vector<std::string>>& steps) {
  std::vector<agcl::Symbol> t;
  t.reserve(steps.size());
  for (const auto& s : steps) t.push_back(c.ap.symbol(std::span<const std::string>(s)));
  return t;
}

std::string trace_paths_json(const CompiledDfa& c) {
  json out = json::array();
  for (const auto& p : agcl::get_trace_paths(c.dfa)) {
    json labels = json::array();
    for (const auto& l : p.labels) {
      json names = json::array();
      for (auto i : l) names.push_back(c.ap.name(i));
      labels.push_back(names);
    }
    out.push_back({{"nodes", p.nodes}, {"labels", labels}});
  }
  return out.dump();
}

std::string plan_json(const std::string& config) {
  const auto c = agcl::config_from_json(json::parse(config));
  const auto p = agcl::build_problem(c);
  return agcl::build_manifest(c, p, agcl::plan(c, p)).dump();
}

std::string run_json(const std::string& config, std::size_t seeds, std::size_t threads,
                     const std::string& out_dir) {
  auto c = agcl::config_from_json(json::parse(config));
  if (seeds) c.seeds = seeds;
  const auto p = agcl::build_problem(c);
  const auto cur = agcl::plan(c, p);
  agcl::ExperimentReport rep;
  {
    py::gil_scoped_release release;
    rep = agcl::run_experiment(c, p, cur, agcl::RunOptions{threads, false});
  }
  if (!out_dir.empty()) agcl::write_outputs(out_dir, c, p, cur, rep);
  json out = agcl::stats_json(rep, c);
  out["summary_csv"] = agcl::summary_csv(rep, c);
  out["curves_csv"] = agcl::curves_csv(rep);
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Automaton-guided curriculum generation: native core";
  m.attr("__version__") = agcl::kToolVersion;

  // later registrations are tried first, so the subclass goes last
  auto& base = py::register_exception<agcl::Error>(m, "AgclError");
  py::register_exception<agcl::SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<nlohmann::json::exception>(m, "JsonError", PyExc_ValueError);

  py::class_<CompiledDfa>(m, "Dfa")
      .def_property_readonly("propositions", [](const CompiledDfa& c) { return c.ap.names(); })
      .def_property_readonly("node_count", [](const CompiledDfa& c) { return c.dfa.node_count(); })
      .def_property_readonly("accepting_count", [](const CompiledDfa& c) { return c.dfa.accepting_count(); })
      .def_property_readonly("initial", [](const CompiledDfa& c) { return c.dfa.initial(); })
      .def("accepts",
           [](const CompiledDfa& c, const std::vector<std::vector<std::string>>& trace) {
             return c.dfa.accepts(to_trace(c, trace));
           },
           py::arg("trace"), "Trace given as a list of sets of proposition names.")
      .def("formula_accepts",
           [](const CompiledDfa& c, const std::vector<std::vector<std::string>>& trace) {
             return agcl::eval_trace(c.formula, to_trace(c, trace));
           },
           py::arg("trace"), "Reference finite-trace semantics of the source formula.")
      .def("accept_distance",
           [](const CompiledDfa& c, agcl::NodeId n) { return agcl::accept_distance(c.dfa, n); })
      .def("_trace_paths_json", &trace_paths_json)
      .def("_to_json", [](const CompiledDfa& c) { return agcl::dfa_to_json(c.dfa).dump(); })
      .def("to_dot", [](const CompiledDfa& c) { return agcl::export_dot(c.dfa); });

  m.def("compile", &compile, py::arg("formula"), py::arg("ap"));
  m.def("_plan_json", &plan_json, py::arg("config"));
  m.def("_run_json", &run_json, py::arg("config"), py::arg("seeds") = 0, py::arg("threads") = 1,
        py::arg("out_dir") = "");
  m.def("_default_learner_json", [] { return agcl::hyper_to_json(agcl::DqnHyper{}).dump(); });
  m.def("welch_t_test", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto r = agcl::welch_t_test(a, b);
    return py::make_tuple(r.t, r.p, r.df);
  });
  m.def("time_to_threshold",
        [](const std::vector<std::pair<std::size_t, double>>& curve, double delta, std::size_t offset) {
          std::vector<agcl::EvalRecord> c;
          for (auto [s, r] : curve) c.push_back({s, r, 0.0});
          return agcl::time_to_threshold(c, delta, offset);
        },
        py::arg("curve"), py::arg("delta"), py::arg("offset") = 0);
  m.def("selftest", [](bool quick) {
    std::vector<py::tuple> out;
    for (const auto& r : agcl::run_selftests(quick)) out.push_back(py::make_tuple(r.name, r.passed, r.detail));
    return out;
  }, py::arg("quick") = true);
}
