// agcl command-line entry point: compile, plan, run, report, selftest.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "agcl/compile.hpp"
#include "agcl/error.hpp"
#include "agcl/harness.hpp"
#include "agcl/selftest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace agcl;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON in ") + path.string() + ": " + e.what());
  }
}

// AGCL_SEED overrides the master seed of configs (not of manifests, which
// must replay exactly).
void apply_seed_env(ExperimentConfig& c) {
  if (const char* s = std::getenv("AGCL_SEED")) {
    try {
      std::size_t used = 0;
      c.master_seed = std::stoull(s, &used);
      if (used != std::string(s).size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw SchemaError("AGCL_SEED", "expected a non-negative integer");
    }
  }
}

int fail(const std::string& kind, const std::string& message, const std::string& path = "") {
  json err = {{"error", kind}, {"message", message}};
  if (!path.empty()) err["path"] = path;
  std::cerr << err.dump() << '\n';
  return 2;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

json curriculum_summary(const std::vector<PlannedCurriculum>& cur) {
  json j = json::array();
  for (const auto& pc : cur) {
    j.push_back({{"method", pc.method},
                 {"vertices", pc.result.dag.size()},
                 {"roots", pc.result.dag.roots().size()},
                 {"eta_used", pc.result.eta_used ? json(*pc.result.eta_used) : json(nullptr)},
                 {"candidates", pc.result.candidate_count},
                 {"fell_back", pc.result.fell_back}});
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automaton-guided curriculum generation and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // compile
  auto* compile = app.add_subcommand("compile", "Compile an LTLf formula to a minimal DFA");
  std::string formula, ap_list, config_path, out_dir;
  compile->add_option("--formula", formula, "Formula text");
  compile->add_option("--ap", ap_list, "Comma-separated atomic propositions");
  compile->add_option("--config", config_path, "Take formula and AP from a run config");
  compile->add_option("--out", out_dir, "Directory for dfa.json and dfa.dot");

  // plan
  auto* planc = app.add_subcommand("plan", "Generate curricula for a config");
  std::string mode_override;
  planc->add_option("--config", config_path, "Run config (JSON)")->required();
  planc->add_option("--mode", mode_override, "sequence, graph or both")
      ->check(CLI::IsMember({"sequence", "graph", "both"}));
  planc->add_option("--out", out_dir, "Output directory")->required();

  // run
  auto* run = app.add_subcommand("run", "Train curricula and baselines, write reports");
  std::string manifest_path;
  std::size_t seeds = 0, threads = 1;
  bool parallel_leaves = false;
  auto* run_cfg = run->add_option("--config", config_path, "Run config (JSON)");
  auto* run_man = run->add_option("--manifest", manifest_path, "Replay a manifest.json");
  run_cfg->excludes(run_man);
  run->add_option("--seeds", seeds, "Number of seed replicates (overrides config)");
  run->add_option("--threads", threads, "Parallel training jobs")->check(CLI::PositiveNumber);
  run->add_flag("--parallel-leaves", parallel_leaves, "Train ready curriculum vertices concurrently");
  run->add_option("--out", out_dir, "Output directory")->required();

  // report
  auto* report = app.add_subcommand("report", "Summarize a run directory");
  std::string run_dir;
  report->add_option("--dir", run_dir, "Run directory")->required();

  // selftest
  auto* self = app.add_subcommand("selftest", "Oracle and property checks");
  bool quick = false;
  self->add_flag("--quick", quick, "Skip the slower checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*compile) {
      if (!config_path.empty()) {
        auto c = load_config(config_path);
        formula = c.formula;
        ap_list.clear();
        for (const auto& a : c.ap) ap_list += (ap_list.empty() ? "" : ",") + a;
      }
      if (formula.empty() || ap_list.empty()) return fail("usage_error", "need --formula and --ap, or --config");
      std::vector<std::string> names;
      for (auto& n : split_csv_line(ap_list)) {
        if (!n.empty()) names.push_back(n);
      }
      PropositionSet ap(names);
      auto dfa = compile_dfa(parse_ltlf(formula, ap), ap);
      const auto paths = get_trace_paths(dfa);
      json summary = {{"states", dfa.node_count()},
                      {"accepting", dfa.accepting_count()},
                      {"trace_paths", paths.size()}};
      if (!out_dir.empty()) {
        write_text(fs::path(out_dir) / "dfa.json", dfa_to_json(dfa).dump(2) + "\n");
        write_text(fs::path(out_dir) / "dfa.dot", export_dot(dfa));
      } else {
        std::cout << export_dot(dfa);
      }
      std::cerr << summary.dump() << '\n';
      return 0;
    }

    if (*planc) {
      auto c = load_config(config_path);
      apply_seed_env(c);
      if (!mode_override.empty()) c.mode = mode_override;
      auto p = build_problem(c);
      auto cur = plan(c, p);
      const fs::path dir(out_dir);
      write_text(dir / "manifest.json", build_manifest(c, p, cur).dump(2) + "\n");
      write_text(dir / "dfa.dot", export_dot(p.dfa));
      for (const auto& pc : cur) {
        const auto dot = dag_to_dot(pc.result.dag, p.spec);
        if (pc.method == "agcl-graph" || cur.size() == 1) write_text(dir / "curriculum.dot", dot);
        write_text(dir / ("curriculum-" + pc.method.substr(5) + ".dot"), dot);
      }
      std::cout << curriculum_summary(cur).dump(2) << '\n';
      return 0;
    }

    if (*run) {
      ExperimentConfig c;
      std::vector<PlannedCurriculum> cur;
      std::optional<Problem> p;
      if (!manifest_path.empty()) {
        auto in = manifest_inputs(read_json(manifest_path));
        c = std::move(in.config);
        cur = std::move(in.curricula);
        if (seeds) c.seeds = seeds;
        p = build_problem(c);
      } else if (!config_path.empty()) {
        c = load_config(config_path);
        apply_seed_env(c);
        if (seeds) c.seeds = seeds;
        p = build_problem(c);
        cur = plan(c, *p);
      } else {
        return fail("usage_error", "need --config or --manifest");
      }
      RunOptions opts{threads, parallel_leaves};
      auto rep = run_experiment(c, *p, cur, opts);
      write_outputs(out_dir, c, *p, cur, rep);
      json out = json::array();
      for (const auto& s : summarize(rep, c)) {
        out.push_back({{"method", s.method}, {"reached", s.reached}, {"seeds", s.seeds},
                       {"median_time_to_threshold", s.median_ttt}});
      }
      std::cout << out.dump(2) << '\n';
      return 0;
    }

    if (*report) {
      const fs::path dir(run_dir);
      if (!fs::exists(dir / "summary.csv")) throw Error("no summary.csv in '" + run_dir + "'");
      const auto stats = read_json(dir / "stats.json");
      std::string line;
      std::ostringstream table;
      table << std::left << std::setw(16) << "method" << std::setw(8) << "seeds" << std::setw(9) << "reached"
            << "median_ttt\n";
      for (const auto& m : stats.at("methods")) {
        table << std::setw(16) << m.at("method").get<std::string>() << std::setw(8)
              << m.at("seeds").get<std::size_t>() << std::setw(9) << m.at("reached").get<std::size_t>()
              << m.at("median_time_to_threshold").get<double>() << '\n';
      }
      for (const auto& t : stats.at("comparisons")) {
        table << "welch " << t.at("a").get<std::string>() << " vs " << t.at("b").get<std::string>() << ": ";
        if (t.contains("error")) {
          table << t["error"].get<std::string>() << '\n';
        } else {
          table << "t=" << t.at("t").get<double>() << " p=" << t.at("p").get<double>() << '\n';
        }
      }
      write_text(dir / "report.txt", table.str());
      // per-method curve files
      std::ifstream curves(dir / "curves.csv");
      if (curves) {
        std::string header;
        std::getline(curves, header);
        std::map<std::string, std::ostringstream> per;
        while (std::getline(curves, line)) {
          auto method = line.substr(0, line.find(','));
          auto& os = per[method];
          if (os.tellp() == 0) os << header << '\n';
          os << line << '\n';
        }
        for (auto& [m, os] : per) write_text(dir / ("curves-" + m + ".csv"), os.str());
      }
      std::cout << table.str();
      return 0;
    }

    if (*self) {
      auto results = run_selftests(quick);
      bool ok = true;
      for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        ok = ok && r.passed;
      }
      return ok ? 0 : 1;
    }
  } catch (const SchemaError& e) {
    return fail(e.kind(), e.what(), e.path());
  } catch (const Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail("internal_error", e.what());
  }
  return 0;
}
