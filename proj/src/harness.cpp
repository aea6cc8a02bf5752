#include "agcl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "agcl/compile.hpp"
#include "agcl/error.hpp"

namespace agcl {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                    const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  for (const auto& [k, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw SchemaError(path.empty() ? k : path + "." + k, "unknown key");
    }
  }
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw SchemaError(join(path, key), "missing");
  return j[key];
}

// Parsed text yields unsigned numbers; JSON built in code may carry signed ones.
bool is_whole(const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); }

std::size_t get_count(const json& v, const std::string& path, bool positive = true) {
  if (!is_whole(v) || (positive && v.get<std::size_t>() == 0)) {
    throw SchemaError(path, positive ? "expected a positive integer" : "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

double get_real(const json& v, const std::string& path, double lo, double hi) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x) || x < lo || x > hi) {
    std::ostringstream m;
    m << "expected a number in [" << lo << ", " << hi << "]";
    throw SchemaError(path, m.str());
  }
  return x;
}

std::uint64_t get_seed(const json& v, const std::string& path) {
  if (!is_whole(v)) throw SchemaError(path, "expected a non-negative integer seed");
  return v.get<std::uint64_t>();
}

const std::set<std::string> kBaselines = {"scratch", "gsrs"};

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j, {"name", "formula", "ap", "oomdp", "target", "mode", "eta", "sampling", "noise",
                     "learner", "budget", "seeds", "baselines", "threshold", "env"},
                 "");
  ExperimentConfig c;
  if (j.contains("name")) {
    if (!j["name"].is_string()) throw SchemaError("name", "expected a string");
    c.name = j["name"].get<std::string>();
  }
  const auto& f = need(j, "formula", "");
  if (!f.is_string()) throw SchemaError("formula", "expected a string");
  c.formula = f.get<std::string>();

  const auto& ap = need(j, "ap", "");
  if (!ap.is_array() || ap.empty()) throw SchemaError("ap", "expected a non-empty array of names");
  for (std::size_t i = 0; i < ap.size(); ++i) {
    if (!ap[i].is_string()) throw SchemaError("ap[" + std::to_string(i) + "]", "expected a string");
    c.ap.push_back(ap[i].get<std::string>());
  }
  c.oomdp = spec_from_json(need(j, "oomdp", ""), "oomdp");

  const auto& t = need(j, "target", "");
  reject_unknown(t, {"s0_oo", "sf_oo"}, "target");
  c.target_s0 = state_from_json(c.oomdp, need(t, "s0_oo", "target"), "target.s0_oo");
  c.target_sf = state_from_json(c.oomdp, need(t, "sf_oo", "target"), "target.sf_oo");

  if (j.contains("mode")) {
    const auto& m = j["mode"];
    if (!m.is_string() || (m != "sequence" && m != "graph" && m != "both")) {
      throw SchemaError("mode", "expected 'sequence', 'graph' or 'both'");
    }
    c.mode = m.get<std::string>();
  }
  if (j.contains("eta") && !j["eta"].is_null()) c.eta = get_real(j["eta"], "eta", -1e9, 1e9);

  if (j.contains("sampling")) {
    const auto& s = j["sampling"];
    reject_unknown(s, {"b", "subset_fraction", "eta_percentile", "max_per_path", "grid_cap", "candidate_cap"},
                   "sampling");
    if (s.contains("b")) c.b = get_count(s["b"], "sampling.b");
    if (s.contains("subset_fraction")) {
      c.subset_fraction = get_real(s["subset_fraction"], "sampling.subset_fraction", 1e-9, 1.0);
    }
    if (s.contains("eta_percentile")) {
      c.eta_percentile = get_real(s["eta_percentile"], "sampling.eta_percentile", 1e-9, 1.0);
    }
    if (s.contains("max_per_path")) c.max_per_path = get_count(s["max_per_path"], "sampling.max_per_path", false);
    if (s.contains("grid_cap")) c.grid_cap = get_count(s["grid_cap"], "sampling.grid_cap");
    if (s.contains("candidate_cap")) c.candidate_cap = get_count(s["candidate_cap"], "sampling.candidate_cap");
  }

  if (j.contains("noise")) {
    const auto& n = j["noise"];
    reject_unknown(n, {"enabled", "seed"}, "noise");
    if (n.contains("enabled")) {
      if (!n["enabled"].is_boolean()) throw SchemaError("noise.enabled", "expected a boolean");
      c.noise = n["enabled"].get<bool>();
    }
    if (n.contains("seed")) c.noise_seed = get_seed(n["seed"], "noise.seed");
  }

  if (j.contains("learner")) c.learner = hyper_from_json(j["learner"], "learner");

  if (j.contains("budget")) {
    const auto& b = j["budget"];
    if (b.is_object()) {
      reject_unknown(b, {"total", "per_source"}, "budget");
      c.budget = get_count(need(b, "total", "budget"), "budget.total");
      if (b.contains("per_source")) c.source_budget = get_count(b["per_source"], "budget.per_source");
    } else {
      c.budget = get_count(b, "budget");
    }
  }

  if (j.contains("seeds")) {
    const auto& s = j["seeds"];
    if (s.is_object()) {
      reject_unknown(s, {"count", "master"}, "seeds");
      if (s.contains("count")) c.seeds = get_count(s["count"], "seeds.count");
      if (s.contains("master")) c.master_seed = get_seed(s["master"], "seeds.master");
    } else {
      c.seeds = get_count(s, "seeds");
    }
  }

  if (j.contains("baselines")) {
    json list = j["baselines"];
    if (list.is_object()) {
      reject_unknown(list, {"methods", "gsrs_c"}, "baselines");
      if (list.contains("gsrs_c")) c.gsrs_c = get_real(list["gsrs_c"], "baselines.gsrs_c", 0, 1e9);
      list = list.contains("methods") ? list["methods"] : json::array();
    }
    if (!list.is_array()) throw SchemaError("baselines", "expected an array of method names");
    c.baselines.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto where = "baselines[" + std::to_string(i) + "]";
      if (!list[i].is_string() || !kBaselines.contains(list[i].get<std::string>())) {
        throw SchemaError(where, "expected 'scratch' or 'gsrs'");
      }
      if (std::find(c.baselines.begin(), c.baselines.end(), list[i].get<std::string>()) != c.baselines.end()) {
        throw SchemaError(where, "duplicate baseline");
      }
      c.baselines.push_back(list[i].get<std::string>());
    }
  }

  if (j.contains("threshold")) c.threshold = get_real(j["threshold"], "threshold", 1e-9, 1.0);
  if (j.contains("env")) {
    const auto& e = j["env"];
    reject_unknown(e, {"step_cap"}, "env");
    if (e.contains("step_cap")) c.env.step_cap = get_count(e["step_cap"], "env.step_cap");
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["formula"] = c.formula;
  j["ap"] = c.ap;
  j["oomdp"] = spec_to_json(c.oomdp);
  j["target"] = {{"s0_oo", state_to_json(c.oomdp, c.target_s0)},
                 {"sf_oo", state_to_json(c.oomdp, c.target_sf)}};
  j["mode"] = c.mode;
  j["eta"] = c.eta ? json(*c.eta) : json(nullptr);
  j["sampling"] = {{"b", c.b},
                   {"subset_fraction", c.subset_fraction},
                   {"eta_percentile", c.eta_percentile},
                   {"max_per_path", c.max_per_path},
                   {"grid_cap", c.grid_cap},
                   {"candidate_cap", c.candidate_cap}};
  j["noise"] = {{"enabled", c.noise}, {"seed", c.noise_seed}};
  j["learner"] = hyper_to_json(c.learner);
  j["budget"] = {{"total", c.budget}};
  if (c.source_budget) j["budget"]["per_source"] = *c.source_budget;
  j["seeds"] = {{"count", c.seeds}, {"master", c.master_seed}};
  j["baselines"] = {{"methods", c.baselines}, {"gsrs_c", c.gsrs_c}};
  j["threshold"] = c.threshold;
  j["env"] = {{"step_cap", c.env.step_cap}};
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// problem and planning

Problem build_problem(const ExperimentConfig& c) {
  Problem p;
  p.ap = PropositionSet(c.ap);
  p.dfa = compile_dfa(parse_ltlf(c.formula, p.ap), p.ap);
  p.spec = c.noise ? apply_range_noise(c.oomdp, c.noise_seed) : c.oomdp;
  p.spec.validate_bindings(p.ap);
  p.target.id = "target";
  p.target.s0 = c.target_s0;
  p.target.sf = c.target_sf;
  p.target.is_target = true;
  p.target.placement_seed =
      placement_seed_for(derive_seed(c.master_seed, "placement"), p.target.s0, p.target.sf);
  if (!placement_fits(p.spec, c.env, p.target.s0)) {
    throw InfeasibleError("target objects do not fit on its grid");
  }
  return p;
}

AgcgOptions agcg_options(const ExperimentConfig& c, CurriculumMode mode) {
  AgcgOptions o;
  o.mode = mode;
  o.eta = c.eta;
  o.eta_percentile = c.eta_percentile;
  o.b = c.b;
  o.subset_fraction = c.subset_fraction;
  o.grid_cap = c.grid_cap;
  o.candidate_cap = c.candidate_cap;
  o.max_per_path = c.max_per_path;
  o.seed = c.master_seed;
  return o;
}

std::vector<PlannedCurriculum> plan(const ExperimentConfig& c, const Problem& p) {
  std::vector<PlannedCurriculum> out;
  auto run = [&](CurriculumMode m, const char* name) {
    auto opts = agcg_options(c, m);
    opts.filter = placement_filter(p.spec, c.env);
    out.push_back({name, agcg(p.dfa, p.spec, p.target, opts)});
  };
  if (c.mode == "sequence" || c.mode == "both") run(CurriculumMode::Sequence, "agcl-sequence");
  if (c.mode == "graph" || c.mode == "both") run(CurriculumMode::Graph, "agcl-graph");
  return out;
}

// ---------------------------------------------------------------------------
// statistics

std::optional<std::size_t> time_to_threshold(const std::vector<EvalRecord>& curve, double delta,
                                             std::size_t offset) {
  if (curve.empty()) throw PreconditionError("empty learning curve");
  if (!(delta > 0 && delta <= 1)) throw PreconditionError("threshold must lie in (0, 1]");
  auto first = first_reaching(curve, delta);
  if (!first) return std::nullopt;
  return offset + *first;
}

TTestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw PreconditionError("t-test needs at least two samples per group");
  auto moments = [](const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / (n - 1)};
  };
  auto [ma, va] = moments(a);
  auto [mb, vb] = moments(b);
  if (va == 0 && vb == 0 && ma == mb) {
    throw NumericalError("degenerate t-test: both samples constant and equal");
  }
  constexpr double kFloor = 1e-12;
  va = std::max(va, kFloor);
  vb = std::max(vb, kFloor);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double qa = va / na;
  const double qb = vb / nb;
  TTestResult r;
  r.t = (ma - mb) / std::sqrt(qa + qb);
  r.df = (qa + qb) * (qa + qb) / (qa * qa / (na - 1) + qb * qb / (nb - 1));
  boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

// ---------------------------------------------------------------------------
// runs

std::uint64_t replicate_seed(std::uint64_t master, std::size_t index) {
  return derive_seed(derive_seed(master, "replicate"), static_cast<std::uint64_t>(index));
}

namespace {

Architecture arch_for(const ExperimentConfig& c) {
  return default_architecture(kObservationSize, kActionCount, c.learner.hidden);
}

EnvFactory env_for(const ExperimentConfig& c, const Problem& p, const TaskConfig& task) {
  const Dfa* monitor = task.is_target ? &p.dfa : nullptr;
  return [&c, &p, task, monitor] {
    return std::make_unique<Gridworld>(p.spec, c.env, p.ap, task, monitor);
  };
}

// Zero-budget phases still get one evaluation so curves stay non-empty.
TrainReport train_or_evaluate(const EnvFactory& env, const QParams& init, std::size_t budget,
                              const DqnHyper& h, std::uint64_t seed, const RewardShaper& shaper = {}) {
  if (budget > 0) return train(env, init, budget, h, seed, shaper);
  TrainReport r;
  r.params = init;
  auto e = evaluate(init, env, h.eval_episodes, derive_seed(seed, "evaluation"));
  r.eval_steps = e.steps;
  r.evals.push_back({0, e.success_rate, e.mean_return});
  r.reached_threshold = e.success_rate >= h.success_threshold;
  r.budget_exhausted = true;
  return r;
}

DqnHyper target_hyper(const ExperimentConfig& c) {
  DqnHyper h = c.learner;
  h.success_threshold = c.threshold;
  h.early_stop = true;
  return h;
}

}  // namespace

MethodRun run_curriculum(const CurriculumDag& dag, const ExperimentConfig& c, const Problem& p,
                         const std::string& method, std::size_t seed_index, const RunOptions& opts) {
  dag.validate();
  const auto seed = replicate_seed(c.master_seed, seed_index);
  const auto init = init_params(arch_for(c), derive_seed(seed, "init"));
  const auto n = dag.size();
  const std::size_t per_source = c.source_budget.value_or(std::max<std::size_t>(1, c.budget / (2 * n)));

  std::vector<std::optional<QParams>> learned(n);
  std::vector<std::optional<TrainReport>> reports(n);

  auto init_for = [&](std::size_t v) {
    const auto in = dag.in_edges(v);
    if (in.empty()) return init;
    if (in.size() == 1) return transfer_sequence(*learned[dag.edges[in[0]].from], init.arch);
    std::vector<std::pair<const QParams*, double>> src;
    for (auto e : in) src.emplace_back(&*learned[dag.edges[e].from], dag.edges[e].beta);
    return transfer_weighted(src);
  };
  auto train_source = [&](std::size_t v) {
    const auto& task = *dag.vertices[v];
    return train(env_for(c, p, task), init_for(v), per_source, c.learner,
                 derive_seed(seed, task.placement_seed));
  };

  const auto order = dag.topological_order();
  if (opts.parallel_leaves && opts.threads > 1) {
    // waves of vertices whose sources are all trained
    std::vector<bool> done(n, false);
    for (;;) {
      std::vector<std::size_t> ready;
      for (auto v : order) {
        if (v == dag.sink || done[v]) continue;
        const auto in = dag.in_edges(v);
        if (std::all_of(in.begin(), in.end(), [&](auto e) { return done[dag.edges[e].from]; })) ready.push_back(v);
      }
      if (ready.empty()) break;
      for (std::size_t k = 0; k < ready.size(); k += opts.threads) {
        std::vector<std::future<TrainReport>> jobs;
        const auto end = std::min(ready.size(), k + opts.threads);
        for (auto i = k; i < end; ++i) jobs.push_back(std::async(std::launch::async, train_source, ready[i]));
        for (auto i = k; i < end; ++i) reports[ready[i]] = jobs[i - k].get();
      }
      for (auto v : ready) {
        learned[v] = reports[v]->params;
        done[v] = true;
      }
    }
  } else {
    for (auto v : order) {
      if (v == dag.sink) continue;
      reports[v] = train_source(v);
      learned[v] = reports[v]->params;
    }
  }

  MethodRun run;
  run.method = method;
  run.seed_index = seed_index;
  for (auto v : order) {
    if (v == dag.sink) continue;
    PhaseLog ph{v, dag.vertices[v]->id, false, run.source_steps, std::move(*reports[v])};
    run.source_steps += ph.report.steps;
    run.phases.push_back(std::move(ph));
  }
  const auto& target = *dag.vertices[dag.sink];
  const auto remaining = c.budget > run.source_steps ? c.budget - run.source_steps : 0;
  PhaseLog last{dag.sink, "target", true, run.source_steps,
                train_or_evaluate(env_for(c, p, p.target), init_for(dag.sink), remaining, target_hyper(c),
                                  derive_seed(seed, target.placement_seed))};
  run.time_to_threshold = time_to_threshold(last.report.evals, c.threshold, run.source_steps);
  run.phases.push_back(std::move(last));
  return run;
}

MethodRun run_baseline(const std::string& kind, const ExperimentConfig& c, const Problem& p,
                       std::size_t seed_index) {
  if (!kBaselines.contains(kind)) throw PreconditionError("unknown baseline '" + kind + "'");
  const auto seed = replicate_seed(c.master_seed, seed_index);
  const auto init = init_params(arch_for(c), derive_seed(seed, "init"));
  RewardShaper shaper;
  if (kind == "gsrs") {
    auto g = std::make_shared<GsrsShaper>(p.dfa, c.gsrs_c);
    shaper = [g](const StepOutcome& o) { return (*g)(o); };
  }
  MethodRun run;
  run.method = kind;
  run.seed_index = seed_index;
  PhaseLog ph{0, "target", true, 0,
              train_or_evaluate(env_for(c, p, p.target), init, c.budget, target_hyper(c),
                                derive_seed(seed, p.target.placement_seed), shaper)};
  run.time_to_threshold = time_to_threshold(ph.report.evals, c.threshold, 0);
  run.phases.push_back(std::move(ph));
  return run;
}

std::vector<const MethodRun*> ExperimentReport::runs_for(const std::string& method) const {
  std::vector<const MethodRun*> out;
  for (const auto& r : runs) {
    if (r.method == method) out.push_back(&r);
  }
  return out;
}

namespace {

std::vector<double> ttt_samples(const ExperimentReport& r, const std::string& method, std::size_t budget) {
  std::vector<double> out;
  for (const auto* run : r.runs_for(method)) {
    out.push_back(static_cast<double>(run->time_to_threshold.value_or(budget)));
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& c, const Problem& p,
                                const std::vector<PlannedCurriculum>& curricula, const RunOptions& opts) {
  struct Job {
    std::string method;
    const CurriculumDag* dag;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& pc : curricula) {
    for (std::size_t s = 0; s < c.seeds; ++s) jobs.push_back({pc.method, &pc.result.dag, s});
  }
  for (const auto& b : c.baselines) {
    for (std::size_t s = 0; s < c.seeds; ++s) jobs.push_back({b, nullptr, s});
  }

  ExperimentReport report;
  report.runs.resize(jobs.size());
  auto run_job = [&](std::size_t i) {
    const auto& j = jobs[i];
    report.runs[i] = j.dag ? run_curriculum(*j.dag, c, p, j.method, j.seed)
                           : run_baseline(j.method, c, p, j.seed);
  };
  const auto workers = std::max<std::size_t>(1, std::min(opts.threads, jobs.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_job(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (auto i = next++; i < jobs.size(); i = next++) run_job(i);
        } catch (...) {
          errors[w] = std::current_exception();
          next = jobs.size();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<std::string> methods;
  for (const auto& pc : curricula) methods.push_back(pc.method);
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& m : methods) {
    for (const auto& b : c.baselines) pairs.emplace_back(m, b);
  }
  if (methods.size() == 2) pairs.emplace_back(methods[1], methods[0]);
  if (c.baselines.size() == 2) pairs.emplace_back("gsrs", "scratch");
  for (const auto& [a, b] : pairs) {
    Comparison cmp{a, b, ttt_samples(report, a, c.budget), ttt_samples(report, b, c.budget), {}, {}};
    try {
      cmp.test = welch_t_test(cmp.samples_a, cmp.samples_b);
    } catch (const Error& e) {
      cmp.error = e.what();
    }
    report.comparisons.push_back(std::move(cmp));
  }
  return report;
}

std::vector<MethodSummary> summarize(const ExperimentReport& r, const ExperimentConfig& c) {
  std::vector<MethodSummary> out;
  std::vector<std::string> seen;
  for (const auto& run : r.runs) {
    if (std::find(seen.begin(), seen.end(), run.method) != seen.end()) continue;
    seen.push_back(run.method);
    MethodSummary s;
    s.method = run.method;
    auto samples = ttt_samples(r, run.method, c.budget);
    s.seeds = samples.size();
    for (const auto* m : r.runs_for(run.method)) s.reached += m->time_to_threshold ? 1 : 0;
    s.median_ttt = median(samples);
    s.mean_ttt = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// artifacts

json build_manifest(const ExperimentConfig& c, const Problem& p, const std::vector<PlannedCurriculum>& curricula) {
  json m;
  m["tool_version"] = kToolVersion;
  m["config"] = config_to_json(c);
  const auto paths = get_trace_paths(p.dfa);
  m["dfa"] = {{"states", p.dfa.node_count()},
              {"accepting", p.dfa.accepting_count()},
              {"trace_paths", paths.size()},
              {"automaton", dfa_to_json(p.dfa)}};
  m["effective_oomdp"] = spec_to_json(p.spec);
  m["target"] = task_to_json(p.spec, p.target);
  json seeds = json::array();
  for (std::size_t s = 0; s < c.seeds; ++s) seeds.push_back(replicate_seed(c.master_seed, s));
  m["seeds"] = {{"master", c.master_seed},
                {"replicates", seeds},
                {"derivation", "replicate seed -> init / env / explore / replay / evaluation streams"}};
  json cur = json::array();
  for (const auto& pc : curricula) {
    const auto& r = pc.result;
    cur.push_back({{"method", pc.method},
                   {"eta_used", r.eta_used ? json(*r.eta_used) : json(nullptr)},
                   {"path_count", r.path_count},
                   {"candidate_count", r.candidate_count},
                   {"scored_count", r.scored_count},
                   {"admitted", r.admitted},
                   {"sampled_nodes", r.sampled_nodes},
                   {"fell_back", r.fell_back},
                   {"best_avg_jump", r.best_avg_jump},
                   {"warnings", r.warnings},
                   {"vertex_count", r.dag.size()},
                   {"roots", r.dag.roots().size()},
                   {"dag", dag_to_json(r.dag, p.spec)}});
  }
  m["curricula"] = cur;
  m["design_overrides"] = {
      {"per_source_budget", c.source_budget ? json(*c.source_budget) : json("budget / (2|V|)")},
      {"graph_max_per_path", c.max_per_path},
      {"eta_default", "nearest-rank percentile of scored avg jumps"},
      {"unreached_ttt_in_tests", "budget"},
  };
  return m;
}

ManifestInputs manifest_inputs(const json& m) {
  if (!m.is_object() || !m.contains("config") || !m.contains("curricula")) {
    throw SchemaError("manifest", "expected 'config' and 'curricula'");
  }
  ManifestInputs in;
  in.config = config_from_json(m["config"]);
  const auto p = build_problem(in.config);
  for (const auto& cj : m["curricula"]) {
    PlannedCurriculum pc;
    pc.method = cj.at("method").get<std::string>();
    pc.result.dag = dag_from_json(cj.at("dag"), p.spec);
    if (!cj.at("eta_used").is_null()) pc.result.eta_used = cj["eta_used"].get<double>();
    pc.result.path_count = cj.value("path_count", std::size_t{0});
    pc.result.candidate_count = cj.value("candidate_count", std::size_t{0});
    pc.result.scored_count = cj.value("scored_count", std::size_t{0});
    pc.result.admitted = cj.value("admitted", std::size_t{0});
    pc.result.sampled_nodes = cj.value("sampled_nodes", false);
    pc.result.fell_back = cj.value("fell_back", false);
    pc.result.best_avg_jump = cj.value("best_avg_jump", 0.0);
    in.curricula.push_back(std::move(pc));
  }
  return in;
}

namespace {

std::string fmt_rate(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

}  // namespace

std::string curves_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "method,seed,phase,cumulative_steps,eval_success\n";
  for (const auto& run : r.runs) {
    for (const auto& ph : run.phases) {
      for (const auto& e : ph.report.evals) {
        out << run.method << ',' << run.seed_index << ',' << ph.task_id << ',' << ph.offset + e.step << ','
            << fmt_rate(e.success_rate) << '\n';
      }
    }
  }
  return out.str();
}

std::string summary_csv(const ExperimentReport& r, const ExperimentConfig&) {
  std::ostringstream out;
  out << "method,seed,time_to_threshold,reached,source_steps,target_steps\n";
  for (const auto& run : r.runs) {
    out << run.method << ',' << run.seed_index << ',';
    if (run.time_to_threshold) {
      out << *run.time_to_threshold;
    } else {
      out << "NA";
    }
    out << ',' << (run.time_to_threshold ? 1 : 0) << ',' << run.source_steps << ','
        << run.phases.back().report.steps << '\n';
  }
  return out.str();
}

std::string phases_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "method,seed,order,vertex,phase,is_target,offset,steps,eval_steps,episodes,updates,final_success\n";
  for (const auto& run : r.runs) {
    for (std::size_t k = 0; k < run.phases.size(); ++k) {
      const auto& ph = run.phases[k];
      const auto& rep = ph.report;
      out << run.method << ',' << run.seed_index << ',' << k << ',' << ph.vertex << ',' << ph.task_id << ','
          << (ph.is_target ? 1 : 0) << ',' << ph.offset << ',' << rep.steps << ',' << rep.eval_steps << ','
          << rep.episodes.size() << ',' << rep.updates << ','
          << fmt_rate(rep.evals.empty() ? 0.0 : rep.evals.back().success_rate) << '\n';
    }
  }
  return out.str();
}

json stats_json(const ExperimentReport& r, const ExperimentConfig& c) {
  json j;
  j["threshold"] = c.threshold;
  j["budget"] = c.budget;
  j["unreached_counts_as"] = c.budget;
  json methods = json::array();
  for (const auto& s : summarize(r, c)) {
    methods.push_back({{"method", s.method},
                       {"seeds", s.seeds},
                       {"reached", s.reached},
                       {"median_time_to_threshold", s.median_ttt},
                       {"mean_time_to_threshold", s.mean_ttt}});
  }
  j["methods"] = methods;
  json tests = json::array();
  for (const auto& cmp : r.comparisons) {
    json t = {{"a", cmp.a}, {"b", cmp.b}, {"test", "welch"}, {"n_a", cmp.samples_a.size()},
              {"n_b", cmp.samples_b.size()}};
    if (cmp.error) {
      t["error"] = *cmp.error;
    } else {
      t["t"] = cmp.test.t;
      t["p"] = cmp.test.p;
      t["df"] = cmp.test.df;
    }
    tests.push_back(t);
  }
  j["comparisons"] = tests;
  return j;
}

void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& c, const Problem& p,
                   const std::vector<PlannedCurriculum>& curricula, const ExperimentReport& r) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write '" + (dir / name).string() + "'");
    out << text;
  };
  put("manifest.json", build_manifest(c, p, curricula).dump(2) + "\n");
  put("dfa.dot", export_dot(p.dfa));
  for (const auto& pc : curricula) {
    const auto dot = dag_to_dot(pc.result.dag, p.spec);
    // the graph curriculum is the primary one when present
    if (pc.method == "agcl-graph" || curricula.size() == 1) put("curriculum.dot", dot);
    put("curriculum-" + pc.method.substr(pc.method.find('-') + 1) + ".dot", dot);
  }
  put("curves.csv", curves_csv(r));
  put("summary.csv", summary_csv(r, c));
  put("phases.csv", phases_csv(r));
  put("stats.json", stats_json(r, c).dump(2) + "\n");
}

}  // namespace agcl
