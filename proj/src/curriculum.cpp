#include "agcl/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "agcl/error.hpp"
#include "agcl/rng.hpp"

namespace agcl {

double param_ratio(double v, double v_target) noexcept {
  if (v == v_target) return 1.0;
  if (v <= 0 || v_target <= 0) return 0.0;
  return std::min(v, v_target) / std::max(v, v_target);
}

namespace {

double mean_ratio(const OomdpState& a, const OomdpState& target) {
  if (a.values.size() != target.values.size()) {
    throw PreconditionError("task schema does not match the target");
  }
  if (a.values.empty()) return 1.0;
  double sum = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) sum += param_ratio(a[i], target[i]);
  return sum / static_cast<double>(a.values.size());
}

double jump_from(double sti, double sgi, double stj, double sgj) {
  return 0.5 * ((stj - sti) + (sgj - sgi));
}

// Per-path candidate space with similarity values cached per task.
struct PathSpace {
  std::size_t path_index = 0;
  std::vector<std::vector<TaskRef>> nodes;
  std::vector<std::vector<double>> st, sg;

  PathSpace(std::size_t index, std::vector<std::vector<TaskRef>> node_tasks, const TaskConfig& target)
      : path_index(index), nodes(std::move(node_tasks)) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (nodes[k].empty()) {
        throw InfeasibleError("no task reaches node " + std::to_string(k + 1) + " of path " +
                              std::to_string(index));
      }
      st.emplace_back();
      sg.emplace_back();
      for (const auto& t : nodes[k]) {
        st.back().push_back(sim_t(*t, target));
        sg.back().push_back(sim_g(*t, target));
      }
    }
  }

  double count() const {
    double c = 1;
    for (const auto& n : nodes) c *= static_cast<double>(n.size());
    return c;
  }

  double score(const std::vector<std::size_t>& idx) const {
    double sum = 0;
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
      sum += jump_from(st[k][idx[k]], sg[k][idx[k]], st[k + 1][idx[k + 1]], sg[k + 1][idx[k + 1]]);
    }
    return sum / static_cast<double>(idx.size());
  }

  std::vector<TaskRef> tasks(const std::vector<std::size_t>& idx) const {
    std::vector<TaskRef> out;
    for (std::size_t k = 0; k < idx.size(); ++k) out.push_back(nodes[k][idx[k]]);
    return out;
  }

  // Odometer step, last node fastest. Returns false after the last tuple.
  bool next(std::vector<std::size_t>& idx) const {
    for (std::size_t k = idx.size(); k-- > 0;) {
      if (++idx[k] < nodes[k].size()) return true;
      idx[k] = 0;
    }
    return false;
  }
};

bool better(double a, double b) { return a < b - kScoreTieTolerance; }

}  // namespace

double sim_t(const TaskConfig& task, const TaskConfig& target) {
  return mean_ratio(task.s0, target.s0);
}

double sim_g(const TaskConfig& task, const TaskConfig& target) {
  return mean_ratio(task.sf, target.sf);
}

double jump_score(const TaskConfig& mi, const TaskConfig& mj, const TaskConfig& target) {
  return jump_from(sim_t(mi, target), sim_g(mi, target), sim_t(mj, target), sim_g(mj, target));
}

double avg_jump(std::span<const TaskRef> psi, const TaskConfig& target) {
  if (psi.empty()) throw PreconditionError("empty candidate list");
  double sum = 0;
  for (std::size_t k = 0; k + 1 < psi.size(); ++k) sum += jump_score(*psi[k], *psi[k + 1], target);
  return sum / static_cast<double>(psi.size());
}

std::vector<CandidateList> list_candidates(std::size_t path_index,
                                           const std::vector<std::vector<TaskRef>>& node_tasks,
                                           const TaskConfig& target, std::size_t cap) {
  if (node_tasks.empty()) throw PreconditionError("path has no transitions");
  PathSpace space(path_index, node_tasks, target);
  if (space.count() > static_cast<double>(cap)) {
    throw ResourceLimitError("candidate space exceeds cap " + std::to_string(cap));
  }
  std::vector<CandidateList> out;
  out.reserve(static_cast<std::size_t>(space.count()));
  std::vector<std::size_t> idx(node_tasks.size(), 0);
  do {
    out.push_back({path_index, space.tasks(idx), space.score(idx)});
  } while (space.next(idx));
  return out;
}

std::size_t select_sequence(std::span<const CandidateList> candidates) {
  if (candidates.empty()) throw PreconditionError("no candidates to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (better(candidates[i].avg_jump, candidates[best].avg_jump)) best = i;
  }
  return best;
}

std::vector<double> beta_weights(std::span<const double> jumps) {
  if (jumps.empty()) throw PreconditionError("beta weights need at least one in-edge");
  std::vector<double> out;
  double total = 0;
  for (double j : jumps) {
    out.push_back(1.0 / std::max(j, 1e-6));
    total += out.back();
  }
  for (double& b : out) b /= total;
  return out;
}

std::vector<std::size_t> sample_indices(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0 && fraction <= 1)) throw PreconditionError("subset fraction must be in (0, 1]");
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  k = std::min(k, n);
  if (k == n) return all;
  std::vector<std::size_t> out;
  out.reserve(k);
  Rng rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
  return out;
}

std::vector<CandidateList> sample_candidate_subset(std::span<const CandidateList> candidates,
                                                   double fraction, std::uint64_t seed) {
  std::vector<CandidateList> out;
  for (auto i : sample_indices(candidates.size(), fraction, seed)) out.push_back(candidates[i]);
  return out;
}

// ---------------------------------------------------------------------------
// DAG

std::vector<std::size_t> CurriculumDag::in_edges(std::size_t v) const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].to == v) out.push_back(e);
  }
  return out;
}

std::vector<std::size_t> CurriculumDag::out_edges(std::size_t v) const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].from == v) out.push_back(e);
  }
  return out;
}

std::vector<std::size_t> CurriculumDag::roots() const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < size(); ++v) {
    if (in_edges(v).empty()) out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> CurriculumDag::topological_order() const {
  std::vector<std::size_t> indegree(size(), 0);
  for (const auto& e : edges) ++indegree.at(e.to);
  std::set<std::size_t> ready;
  for (std::size_t v = 0; v < size(); ++v) {
    if (indegree[v] == 0) ready.insert(v);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    auto v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (const auto& e : edges) {
      if (e.from == v && --indegree[e.to] == 0) ready.insert(e.to);
    }
  }
  if (order.size() != size()) throw PreconditionError("curriculum graph has a cycle");
  return order;
}

void CurriculumDag::validate() const {
  if (vertices.empty()) throw PreconditionError("curriculum graph is empty");
  if (sink >= size()) throw PreconditionError("sink index out of range");
  if (!vertices[sink] || !vertices[sink]->is_target) {
    throw PreconditionError("sink is not the target task");
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& e : edges) {
    if (e.from >= size() || e.to >= size()) throw PreconditionError("edge endpoint out of range");
    if (e.from == e.to) throw PreconditionError("self-loop in curriculum graph");
    if (!seen.insert({e.from, e.to}).second) throw PreconditionError("duplicate edge");
    if (!(e.beta >= 0 && e.beta <= 1)) throw PreconditionError("beta outside [0, 1]");
  }
  topological_order();
  for (std::size_t v = 0; v < size(); ++v) {
    const bool has_out = !out_edges(v).empty();
    if (v == sink && has_out) throw PreconditionError("sink has outgoing edges");
    if (v != sink && !has_out) throw PreconditionError("more than one sink");
    auto in = in_edges(v);
    if (!in.empty()) {
      double sum = 0;
      for (auto e : in) sum += edges[e].beta;
      if (std::abs(sum - 1.0) > 1e-9) {
        throw PreconditionError("in-edge betas of vertex " + std::to_string(v) + " sum to " +
                                std::to_string(sum));
      }
    }
  }
  // Every vertex reaches the sink: with one sink and no cycles this already
  // holds, but check explicitly by reverse search.
  std::vector<bool> reach(size(), false);
  std::vector<std::size_t> stack{sink};
  reach[sink] = true;
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    for (const auto& e : edges) {
      if (e.to == v && !reach[e.from]) {
        reach[e.from] = true;
        stack.push_back(e.from);
      }
    }
  }
  if (std::find(reach.begin(), reach.end(), false) != reach.end()) {
    throw PreconditionError("vertex cannot reach the target");
  }
}

DagBuilder::DagBuilder(TaskRef target) : target_(std::move(target)) {
  if (!target_) throw PreconditionError("null target");
}

std::size_t DagBuilder::vertex_for(const TaskRef& t) {
  auto [it, inserted] = index_.try_emplace({t->s0, t->sf}, vertices_.size());
  if (inserted) vertices_.push_back(t);
  return it->second;
}

void DagBuilder::add(std::span<const TaskRef> psi) {
  if (psi.empty() || !psi.back()->same_task(*target_)) {
    throw PreconditionError("candidate list must end at the target");
  }
  std::size_t prev = vertex_for(psi[0]);
  for (std::size_t k = 1; k < psi.size(); ++k) {
    std::size_t cur = vertex_for(psi[k]);
    if (cur == prev) throw PreconditionError("consecutive candidate tasks are identical");
    if (edge_index_.try_emplace({prev, cur}, edges_.size()).second) {
      edges_.push_back({prev, cur, jump_score(*vertices_[prev], *vertices_[cur], *target_), 1.0});
    }
    prev = cur;
  }
}

CurriculumDag DagBuilder::finish() const {
  if (vertices_.empty()) throw PreconditionError("no candidates were added");
  CurriculumDag dag;
  dag.vertices = vertices_;
  dag.edges = edges_;
  for (std::size_t v = 0; v < vertices_.size(); ++v) {
    if (vertices_[v]->same_task(*target_)) dag.sink = v;
    auto in = dag.in_edges(v);
    if (in.empty()) continue;
    std::vector<double> jumps;
    for (auto e : in) jumps.push_back(dag.edges[e].jump);
    auto betas = beta_weights(jumps);
    for (std::size_t i = 0; i < in.size(); ++i) dag.edges[in[i]].beta = betas[i];
  }
  return dag;
}

CurriculumDag chain_dag(const CandidateList& psi, const TaskRef& target) {
  DagBuilder builder(target);
  builder.add(psi.tasks);
  return builder.finish();
}

namespace {

// Keeps the `k` best candidates seen, earlier candidates winning ties.
template <class T>
void keep_best(std::vector<std::pair<double, T>>& kept, double score, T item, std::size_t k) {
  auto pos = std::find_if(kept.begin(), kept.end(),
                          [&](const auto& e) { return better(score, e.first); });
  if (kept.size() >= k && pos == kept.end()) return;
  kept.insert(pos, {score, std::move(item)});
  if (kept.size() > k) kept.pop_back();
}

}  // namespace

GraphSelection select_graph(std::span<const CandidateList> candidates, double eta,
                            const TaskRef& target, std::size_t max_per_path) {
  if (candidates.empty()) throw PreconditionError("no candidates to select from");
  if (!std::isfinite(eta)) throw PreconditionError("eta must be finite");
  GraphSelection out;
  std::vector<std::size_t> chosen;
  std::map<std::size_t, std::vector<std::pair<double, std::size_t>>> per_path;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].avg_jump > eta) continue;
    ++out.admitted;
    if (max_per_path == 0) {
      chosen.push_back(i);
    } else {
      keep_best(per_path[candidates[i].path_index], candidates[i].avg_jump, i, max_per_path);
    }
  }
  for (const auto& [_, kept] : per_path) {
    for (const auto& [score, i] : kept) chosen.push_back(i);
  }
  std::sort(chosen.begin(), chosen.end());
  if (chosen.empty()) {
    out.fell_back = true;
    out.dag = chain_dag(candidates[select_sequence(candidates)], target);
    return out;
  }
  DagBuilder builder(target);
  for (auto i : chosen) builder.add(candidates[i].tasks);
  out.dag = builder.finish();
  return out;
}

double nearest_rank(std::vector<double> values, double q) {
  if (values.empty()) throw PreconditionError("percentile of an empty set");
  if (!(q > 0 && q <= 1)) throw PreconditionError("percentile must be in (0, 1]");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

// ---------------------------------------------------------------------------
// AGCG

namespace {

std::uint64_t node_sample_seed(std::uint64_t seed, NodeId node, const NodeRequirement& req) {
  std::uint64_t h = derive_seed(derive_seed(seed, "node-sample"), node);
  for (auto c : req.event_counts) h = derive_seed(h, c);
  return h;
}

struct NodeKey {
  NodeId node;
  std::vector<std::size_t> counts;
  bool sampled;
  auto operator<=>(const NodeKey&) const = default;
};

}  // namespace

AgcgResult agcg(const Dfa& dfa, const OomdpSpec& spec, const TaskConfig& target,
                const AgcgOptions& opts) {
  AgcgResult result;
  auto paths = get_trace_paths(dfa);
  if (paths.empty()) throw UnsatisfiableError("no accepting node is reachable through progress edges");
  spec.validate_bindings(dfa.propositions());
  if (target.s0.values.size() != spec.param_count() || target.sf.values.size() != spec.param_count()) {
    throw PreconditionError("target does not match the task space");
  }
  auto target_copy = target;
  target_copy.is_target = true;
  TaskRef target_ref = std::make_shared<const TaskConfig>(std::move(target_copy));
  result.path_count = paths.size();

  NodeTaskOptions node_opts;
  node_opts.grid_cap = opts.grid_cap;
  node_opts.seed = derive_seed(opts.seed, "placement");
  node_opts.filter = opts.filter;

  // Task sets are shared between paths that reach a node with the same event
  // multiset, so equal samples merge in graph mode.
  std::map<NodeKey, std::vector<TaskRef>> cache;
  auto tasks_at = [&](const TracePath& path, std::size_t k, bool force_sample) {
    const NodeId node = path.nodes[k];
    if (k + 1 == path.nodes.size() && dfa.is_accepting(node)) return std::vector<TaskRef>{target_ref};
    auto req = node_requirement(dfa, path, k, spec, *target_ref);
    auto grid = node_grid_size(dfa, path, k, spec, *target_ref);
    const bool sample = !grid || *grid > static_cast<double>(opts.grid_cap) ||
                        (force_sample && *grid > static_cast<double>(opts.b));
    NodeKey key{node, req.event_counts, sample};
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<TaskConfig> tasks =
        sample ? sample_node_tasks(dfa, path, k, spec, *target_ref, opts.b,
                                   node_sample_seed(opts.seed, node, req), node_opts)
               : tasks_for_node(dfa, path, k, spec, *target_ref, node_opts);
    if (sample) result.sampled_nodes = true;
    // A source task indistinguishable from the target would merge into it.
    std::erase_if(tasks, [&](const TaskConfig& t) { return t.same_task(*target_ref); });
    std::vector<TaskRef> refs;
    for (auto& t : tasks) refs.push_back(std::make_shared<const TaskConfig>(std::move(t)));
    cache.emplace(key, refs);
    return refs;
  };

  auto build_spaces = [&](bool force_sample) {
    std::vector<PathSpace> spaces;
    for (std::size_t p = 0; p < paths.size(); ++p) {
      std::vector<std::vector<TaskRef>> nodes;
      for (std::size_t k = 1; k < paths[p].nodes.size(); ++k) {
        nodes.push_back(tasks_at(paths[p], k, force_sample));
      }
      spaces.emplace_back(p, std::move(nodes), *target_ref);
    }
    return spaces;
  };
  auto total_of = [](const std::vector<PathSpace>& spaces) {
    double n = 0;
    for (const auto& s : spaces) n += s.count();
    return n;
  };

  auto spaces = build_spaces(false);
  if (total_of(spaces) > static_cast<double>(opts.candidate_cap)) {
    spaces = build_spaces(true);
    if (total_of(spaces) > static_cast<double>(opts.candidate_cap)) {
      throw ResourceLimitError("candidate space exceeds cap even with per-node sampling");
    }
  }
  result.candidate_count = static_cast<std::size_t>(total_of(spaces));

  std::vector<std::size_t> subset;
  const bool subsetting = opts.subset_fraction < 1.0;
  if (subsetting) {
    subset = sample_indices(result.candidate_count, opts.subset_fraction,
                            derive_seed(opts.seed, "candidate-subset"));
  } else if (!(opts.subset_fraction == 1.0)) {
    throw PreconditionError("subset fraction must be in (0, 1]");
  }

  // Visits every scored candidate in global enumeration order.
  auto for_each_scored = [&](auto&& visit) {
    std::size_t global = 0;
    std::size_t cursor = 0;
    for (const auto& space : spaces) {
      std::vector<std::size_t> idx(space.nodes.size(), 0);
      do {
        const bool take = !subsetting || (cursor < subset.size() && subset[cursor] == global);
        if (take) {
          if (subsetting) ++cursor;
          visit(space, idx, space.score(idx));
        }
        ++global;
      } while (space.next(idx));
    }
  };

  struct Pick {
    const PathSpace* space = nullptr;
    std::vector<std::size_t> idx;
  };
  std::vector<double> scores;
  Pick best;
  double best_score = 0;
  const std::size_t per_path = opts.max_per_path;
  std::vector<std::vector<std::pair<double, Pick>>> kept(spaces.size());
  for_each_scored([&](const PathSpace& space, const std::vector<std::size_t>& idx, double s) {
    scores.push_back(s);
    if (!best.space || better(s, best_score)) {
      best = {&space, idx};
      best_score = s;
    }
    if (per_path > 0) keep_best(kept[space.path_index], s, Pick{&space, idx}, per_path);
  });
  result.scored_count = scores.size();
  if (!best.space) throw PreconditionError("candidate subset is empty");
  result.best_avg_jump = best_score;
  CandidateList winner{best.space->path_index, best.space->tasks(best.idx), best_score};

  if (opts.mode == CurriculumMode::Sequence) {
    result.dag = chain_dag(winner, target_ref);
    return result;
  }

  const double eta = opts.eta ? *opts.eta : nearest_rank(scores, opts.eta_percentile);
  result.eta_used = eta;
  result.admitted = static_cast<std::size_t>(
      std::count_if(scores.begin(), scores.end(), [&](double s) { return s <= eta; }));
  if (result.admitted == 0) {
    result.fell_back = true;
    result.warnings.push_back("no candidate has average jump <= eta; using the sequence winner");
    result.dag = chain_dag(winner, target_ref);
    return result;
  }
  DagBuilder builder(target_ref);
  if (per_path == 0) {
    for_each_scored([&](const PathSpace& space, const std::vector<std::size_t>& idx, double s) {
      if (s <= eta) builder.add(space.tasks(idx));
    });
  } else {
    for (const auto& list : kept) {
      for (const auto& [s, pick] : list) {
        if (s <= eta) builder.add(pick.space->tasks(pick.idx));
      }
    }
  }
  result.dag = builder.finish();
  return result;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json dag_to_json(const CurriculumDag& dag, const OomdpSpec& spec) {
  nlohmann::json vertices = nlohmann::json::array();
  for (const auto& v : dag.vertices) vertices.push_back(task_to_json(spec, *v));
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : dag.edges) {
    edges.push_back({{"from", e.from}, {"to", e.to}, {"jump", e.jump}, {"beta", e.beta}});
  }
  return {{"vertices", std::move(vertices)}, {"edges", std::move(edges)}, {"sink", dag.sink}};
}

CurriculumDag dag_from_json(const nlohmann::json& j, const OomdpSpec& spec) {
  CurriculumDag dag;
  try {
    for (std::size_t i = 0; i < j.at("vertices").size(); ++i) {
      const auto& v = j.at("vertices")[i];
      const std::string path = "curriculum.vertices[" + std::to_string(i) + "]";
      TaskConfig t;
      t.id = v.at("id").get<std::string>();
      t.s0 = state_from_json(spec, v.at("s0"), path + ".s0");
      t.sf = state_from_json(spec, v.at("sf"), path + ".sf");
      t.placement_seed = v.at("placement_seed").get<std::uint64_t>();
      t.is_target = v.at("is_target").get<bool>();
      dag.vertices.push_back(std::make_shared<const TaskConfig>(std::move(t)));
    }
    for (const auto& e : j.at("edges")) {
      dag.edges.push_back({e.at("from").get<std::size_t>(), e.at("to").get<std::size_t>(),
                           e.at("jump").get<double>(), e.at("beta").get<double>()});
    }
    dag.sink = j.at("sink").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("curriculum", e.what());
  }
  dag.validate();
  return dag;
}

namespace {

std::string format_value(const ParamSpec& p, double v) {
  if (p.kind == ParamKind::Integer) return std::to_string(static_cast<long long>(v));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

std::string dag_to_dot(const CurriculumDag& dag, const OomdpSpec& spec) {
  std::string out = "digraph curriculum {\n  rankdir=LR;\n  node [shape=box, fontsize=10];\n";
  for (std::size_t v = 0; v < dag.size(); ++v) {
    const auto& t = *dag.vertices[v];
    std::string s0 = "s0:";
    std::string sf = "sf:";
    for (std::size_t i = 0; i < spec.param_count(); ++i) {
      const auto& p = spec.param(i);
      s0 += " " + p.name + "=" + format_value(p, t.s0[i]);
      if (t.sf[i] != t.s0[i]) sf += " " + p.name + "=" + format_value(p, t.sf[i]);
    }
    out += "  v" + std::to_string(v) + " [label=\"" + (t.is_target ? "target" : t.id) + "\\n" +
           s0 + "\\n" + sf + "\"" + (v == dag.sink ? ", peripheries=2" : "") + "];\n";
  }
  for (const auto& e : dag.edges) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "beta=%.3f J=%.4f", e.beta, e.jump);
    out += "  v" + std::to_string(e.from) + " -> v" + std::to_string(e.to) + " [label=\"" + buf +
           "\"];\n";
  }
  return out + "}\n";
}

}  // namespace agcl
