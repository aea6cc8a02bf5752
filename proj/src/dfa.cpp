#include "agcl/dfa.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "agcl/error.hpp"

namespace agcl {

Dfa::Dfa(PropositionSet ap, std::size_t node_count, NodeId initial, std::vector<bool> accepting,
         std::vector<NodeId> transitions)
    : ap_(std::move(ap)),
      initial_(initial),
      accepting_(std::move(accepting)),
      transitions_(std::move(transitions)) {
  if (node_count == 0) throw PreconditionError("automaton needs at least one node");
  if (accepting_.size() != node_count) throw PreconditionError("accepting set size mismatch");
  if (transitions_.size() != node_count * ap_.alphabet_size()) {
    throw PreconditionError("transition table is not total");
  }
  if (initial_ >= node_count) throw PreconditionError("initial node out of range");
  for (auto t : transitions_) {
    if (t >= node_count) throw PreconditionError("transition target out of range");
  }
}

std::size_t Dfa::accepting_count() const noexcept {
  return static_cast<std::size_t>(std::count(accepting_.begin(), accepting_.end(), true));
}

std::vector<NodeId> Dfa::accepting_nodes() const {
  std::vector<NodeId> out;
  for (NodeId n = 0; n < node_count(); ++n) {
    if (accepting_[n]) out.push_back(n);
  }
  return out;
}

NodeId Dfa::step(NodeId node, Symbol symbol) const {
  if (node >= node_count()) throw PreconditionError("node out of range");
  if (symbol >= alphabet_size()) throw PreconditionError("symbol outside 2^AP");
  return transitions_[static_cast<std::size_t>(node) * alphabet_size() + symbol];
}

bool Dfa::accepts(std::span<const Symbol> trace) const {
  if (trace.empty()) return false;
  NodeId n = initial_;
  for (auto s : trace) n = step(n, s);
  return accepting_[n];
}

MonitorStep advance_monitor(const Dfa& dfa, NodeId node, Symbol labels) {
  NodeId next = dfa.step(node, labels);
  return {next, dfa.is_accepting(next)};
}

std::vector<ProgressEdge> progress_edges(const Dfa& dfa, NodeId from) {
  std::map<NodeId, std::vector<std::size_t>> by_target;
  for (std::size_t p = 0; p < dfa.propositions().size(); ++p) {
    NodeId to = dfa.step(from, Symbol{1} << p);
    if (to != from) by_target[to].push_back(p);
  }
  std::vector<ProgressEdge> out;
  for (auto& [to, props] : by_target) out.push_back({to, std::move(props)});
  return out;
}

namespace {

void collect_paths(const Dfa& dfa, const std::vector<std::vector<ProgressEdge>>& adj,
                   TracePath& current, std::vector<bool>& on_path, std::vector<TracePath>& out) {
  NodeId here = current.nodes.back();
  if (dfa.is_accepting(here)) {
    out.push_back(current);
    return;
  }
  for (const auto& e : adj[here]) {
    if (on_path[e.to]) continue;
    on_path[e.to] = true;
    current.nodes.push_back(e.to);
    current.labels.push_back(e.propositions);
    collect_paths(dfa, adj, current, on_path, out);
    current.nodes.pop_back();
    current.labels.pop_back();
    on_path[e.to] = false;
  }
}

}  // namespace

std::vector<TracePath> get_trace_paths(const Dfa& dfa) {
  std::vector<std::vector<ProgressEdge>> adj(dfa.node_count());
  for (NodeId n = 0; n < dfa.node_count(); ++n) adj[n] = progress_edges(dfa, n);
  std::vector<TracePath> out;
  TracePath current;
  current.nodes.push_back(dfa.initial());
  std::vector<bool> on_path(dfa.node_count(), false);
  on_path[dfa.initial()] = true;
  collect_paths(dfa, adj, current, on_path, out);
  return out;
}

std::vector<NodeId> occ(const TracePath& path) {
  std::vector<NodeId> nodes = path.nodes;
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

std::vector<std::optional<std::size_t>> accept_distances(const Dfa& dfa) {
  const auto n = dfa.node_count();
  std::vector<std::vector<NodeId>> reverse(n);
  for (NodeId u = 0; u < n; ++u) {
    for (const auto& e : progress_edges(dfa, u)) reverse[e.to].push_back(u);
  }
  std::vector<std::optional<std::size_t>> dist(n);
  std::deque<NodeId> queue;
  for (NodeId u = 0; u < n; ++u) {
    if (dfa.is_accepting(u)) {
      dist[u] = 0;
      queue.push_back(u);
    }
  }
  while (!queue.empty()) {
    NodeId v = queue.front();
    queue.pop_front();
    for (NodeId u : reverse[v]) {
      if (!dist[u]) {
        dist[u] = *dist[v] + 1;
        queue.push_back(u);
      }
    }
  }
  return dist;
}

std::optional<std::size_t> accept_distance(const Dfa& dfa, NodeId node) {
  if (node >= dfa.node_count()) throw PreconditionError("node out of range");
  return accept_distances(dfa)[node];
}

// ---------------------------------------------------------------------------
// Predicates: prime implicants by iterated merging, then a greedy cover.

namespace {

struct Cube {
  Symbol value;
  Symbol care;
  auto operator<=>(const Cube&) const = default;
  bool covers(Symbol s) const { return (s & care) == value; }
};

std::string render_cube(const Cube& c, const PropositionSet& ap) {
  if (c.care == 0) return "true";
  std::string out;
  for (std::size_t i = 0; i < ap.size(); ++i) {
    Symbol bit = Symbol{1} << i;
    if (!(c.care & bit)) continue;
    if (!out.empty()) out += " & ";
    if (!(c.value & bit)) out += "!";
    out += ap.name(i);
  }
  return out;
}

}  // namespace

std::string symbol_predicate(std::span<const Symbol> symbols, const PropositionSet& ap) {
  std::set<Symbol> minterms(symbols.begin(), symbols.end());
  if (minterms.empty()) return "false";
  if (minterms.size() == ap.alphabet_size()) return "true";
  const Symbol full = ap.alphabet_size() - 1;

  std::set<Cube> current;
  for (auto m : minterms) current.insert({m, full});
  std::set<Cube> primes;
  while (!current.empty()) {
    std::set<Cube> next;
    std::set<Cube> merged;
    for (auto a = current.begin(); a != current.end(); ++a) {
      for (auto b = std::next(a); b != current.end(); ++b) {
        if (a->care != b->care) continue;
        Symbol diff = a->value ^ b->value;
        if (diff && !(diff & (diff - 1))) {
          next.insert({a->value & ~diff, a->care & ~diff});
          merged.insert(*a);
          merged.insert(*b);
        }
      }
    }
    for (const auto& c : current) {
      if (!merged.count(c)) primes.insert(c);
    }
    current = std::move(next);
  }

  // Greedy cover: largest cube first, ties by cube order.
  std::vector<Cube> ordered(primes.begin(), primes.end());
  std::stable_sort(ordered.begin(), ordered.end(), [](const Cube& a, const Cube& b) {
    return __builtin_popcount(a.care) < __builtin_popcount(b.care);
  });
  std::set<Symbol> uncovered = minterms;
  std::vector<Cube> chosen;
  while (!uncovered.empty()) {
    const Cube* best = nullptr;
    std::size_t best_gain = 0;
    for (const auto& c : ordered) {
      std::size_t gain = 0;
      for (auto m : uncovered) gain += c.covers(m);
      if (gain > best_gain) {
        best = &c;
        best_gain = gain;
      }
    }
    chosen.push_back(*best);
    for (auto it = uncovered.begin(); it != uncovered.end();) {
      it = best->covers(*it) ? uncovered.erase(it) : std::next(it);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  std::string out;
  for (const auto& c : chosen) {
    if (!out.empty()) out += " | ";
    std::string lit = render_cube(c, ap);
    out += (chosen.size() > 1 && c.care && (c.care & (c.care - 1))) ? "(" + lit + ")" : lit;
  }
  return out;
}

namespace {

std::map<NodeId, std::vector<Symbol>> edges_from(const Dfa& dfa, NodeId n) {
  std::map<NodeId, std::vector<Symbol>> out;
  auto row = dfa.row(n);
  for (Symbol s = 0; s < row.size(); ++s) out[row[s]].push_back(s);
  return out;
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string export_dot(const Dfa& dfa) {
  std::string out = "digraph dfa {\n  rankdir=LR;\n  __start [shape=point];\n";
  for (NodeId n = 0; n < dfa.node_count(); ++n) {
    out += "  n" + std::to_string(n) + " [label=\"" + std::to_string(n) + "\", shape=" +
           (dfa.is_accepting(n) ? "doublecircle" : "circle") + "];\n";
  }
  out += "  __start -> n" + std::to_string(dfa.initial()) + ";\n";
  for (NodeId n = 0; n < dfa.node_count(); ++n) {
    for (const auto& [to, syms] : edges_from(dfa, n)) {
      out += "  n" + std::to_string(n) + " -> n" + std::to_string(to) + " [label=\"" +
             dot_escape(symbol_predicate(syms, dfa.propositions())) + "\"];\n";
    }
  }
  return out + "}\n";
}

nlohmann::json dfa_to_json(const Dfa& dfa) {
  nlohmann::json j;
  j["ap"] = dfa.propositions().names();
  j["nodes"] = dfa.node_count();
  j["initial"] = dfa.initial();
  j["accepting"] = dfa.accepting_nodes();
  nlohmann::json adj = nlohmann::json::object();
  for (NodeId n = 0; n < dfa.node_count(); ++n) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [to, syms] : edges_from(dfa, n)) {
      list.push_back({{"to", to},
                      {"label", symbol_predicate(syms, dfa.propositions())},
                      {"symbols", syms}});
    }
    adj[std::to_string(n)] = std::move(list);
  }
  j["transitions"] = std::move(adj);
  return j;
}

Dfa dfa_from_json(const nlohmann::json& j) {
  try {
    PropositionSet ap(j.at("ap").get<std::vector<std::string>>());
    auto n = j.at("nodes").get<std::size_t>();
    std::vector<bool> accepting(n, false);
    for (auto a : j.at("accepting").get<std::vector<NodeId>>()) accepting.at(a) = true;
    std::vector<NodeId> table(n * ap.alphabet_size(), static_cast<NodeId>(n));
    for (std::size_t u = 0; u < n; ++u) {
      for (const auto& e : j.at("transitions").at(std::to_string(u))) {
        auto to = e.at("to").get<NodeId>();
        for (auto s : e.at("symbols").get<std::vector<Symbol>>()) {
          table.at(u * ap.alphabet_size() + s) = to;
        }
      }
    }
    return Dfa(std::move(ap), n, j.at("initial").get<NodeId>(), std::move(accepting),
               std::move(table));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("dfa", e.what());
  } catch (const std::out_of_range& e) {
    throw SchemaError("dfa", e.what());
  }
}

}  // namespace agcl
