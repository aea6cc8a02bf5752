#include "agcl/compile.hpp"

#include <deque>
#include <unordered_map>

#include "agcl/error.hpp"

namespace agcl {

namespace {

// Renumbers reachable nodes breadth-first, symbols in increasing order.
Dfa canonical_order(const PropositionSet& ap, NodeId initial, const std::vector<bool>& accepting,
                    const std::vector<NodeId>& table) {
  const Symbol k = ap.alphabet_size();
  std::vector<NodeId> order;
  std::unordered_map<NodeId, NodeId> renumber;
  std::deque<NodeId> queue{initial};
  renumber[initial] = 0;
  order.push_back(initial);
  while (!queue.empty()) {
    NodeId u = queue.front();
    queue.pop_front();
    for (Symbol s = 0; s < k; ++s) {
      NodeId v = table[static_cast<std::size_t>(u) * k + s];
      if (renumber.emplace(v, static_cast<NodeId>(order.size())).second) {
        order.push_back(v);
        queue.push_back(v);
      }
    }
  }
  std::vector<bool> acc(order.size());
  std::vector<NodeId> out(order.size() * k);
  for (std::size_t i = 0; i < order.size(); ++i) {
    acc[i] = accepting[order[i]];
    for (Symbol s = 0; s < k; ++s) {
      out[i * k + s] = renumber.at(table[static_cast<std::size_t>(order[i]) * k + s]);
    }
  }
  return Dfa(ap, order.size(), 0, std::move(acc), std::move(out));
}

}  // namespace

Dfa minimize(const Dfa& input) {
  // Drop unreachable nodes first so refinement only sees live structure.
  std::vector<bool> acc_in(input.node_count());
  std::vector<NodeId> table_in;
  for (NodeId n = 0; n < input.node_count(); ++n) {
    acc_in[n] = input.is_accepting(n);
    auto row = input.row(n);
    table_in.insert(table_in.end(), row.begin(), row.end());
  }
  const Dfa dfa = canonical_order(input.propositions(), input.initial(), acc_in, table_in);

  const std::size_t n = dfa.node_count();
  const Symbol k = dfa.alphabet_size();

  // inverse[s][v] = predecessors of v on symbol s
  std::vector<std::vector<std::vector<NodeId>>> inverse(k, std::vector<std::vector<NodeId>>(n));
  for (NodeId u = 0; u < n; ++u) {
    for (Symbol s = 0; s < k; ++s) inverse[s][dfa.step(u, s)].push_back(u);
  }

  std::vector<std::size_t> block_of(n);
  std::vector<std::vector<NodeId>> blocks;
  {
    std::vector<NodeId> acc, rej;
    for (NodeId u = 0; u < n; ++u) (dfa.is_accepting(u) ? acc : rej).push_back(u);
    for (auto* part : {&acc, &rej}) {
      if (part->empty()) continue;
      for (auto u : *part) block_of[u] = blocks.size();
      blocks.push_back(std::move(*part));
    }
  }

  std::deque<std::pair<std::size_t, Symbol>> work;
  std::vector<std::vector<bool>> in_work(blocks.size(), std::vector<bool>(k, false));
  auto push_work = [&](std::size_t b, Symbol s) {
    if (in_work.size() <= b) in_work.resize(b + 1, std::vector<bool>(k, false));
    if (!in_work[b][s]) {
      in_work[b][s] = true;
      work.emplace_back(b, s);
    }
  };
  if (blocks.size() == 2) {
    std::size_t smaller = blocks[0].size() <= blocks[1].size() ? 0 : 1;
    for (Symbol s = 0; s < k; ++s) push_work(smaller, s);
  }

  std::vector<bool> marked(n, false);
  while (!work.empty()) {
    auto [splitter, s] = work.front();
    work.pop_front();
    in_work[splitter][s] = false;

    std::vector<NodeId> x;
    for (NodeId v : blocks[splitter]) {
      for (NodeId u : inverse[s][v]) {
        if (!marked[u]) {
          marked[u] = true;
          x.push_back(u);
        }
      }
    }
    std::vector<std::size_t> touched;
    for (NodeId u : x) {
      auto b = block_of[u];
      if (std::find(touched.begin(), touched.end(), b) == touched.end()) touched.push_back(b);
    }
    std::sort(touched.begin(), touched.end());
    for (auto b : touched) {
      std::vector<NodeId> in, out;
      for (NodeId u : blocks[b]) (marked[u] ? in : out).push_back(u);
      if (in.empty() || out.empty()) continue;
      const std::size_t fresh = blocks.size();
      blocks[b] = std::move(in);
      blocks.push_back(std::move(out));
      for (NodeId u : blocks[fresh]) block_of[u] = fresh;
      for (Symbol d = 0; d < k; ++d) {
        if (in_work.size() > b && in_work[b][d]) {
          push_work(fresh, d);
        } else {
          push_work(blocks[b].size() <= blocks[fresh].size() ? b : fresh, d);
        }
      }
    }
    for (NodeId u : x) marked[u] = false;
  }

  std::vector<bool> acc(blocks.size());
  std::vector<NodeId> table(blocks.size() * k);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    NodeId rep = blocks[b].front();
    acc[b] = dfa.is_accepting(rep);
    for (Symbol s = 0; s < k; ++s) {
      table[b * k + s] = static_cast<NodeId>(block_of[dfa.step(rep, s)]);
    }
  }
  return canonical_order(dfa.propositions(), static_cast<NodeId>(block_of[dfa.initial()]), acc,
                         table);
}

Dfa compile_dfa(const Formula& f, const PropositionSet& ap, const CompileOptions& opts) {
  const Symbol k = ap.alphabet_size();
  struct State {
    Formula obligation;
    bool accepting;
  };
  std::vector<State> states;
  std::unordered_map<std::string, NodeId> index;
  std::vector<NodeId> table;

  auto intern = [&](Formula ob, bool accepting) -> NodeId {
    std::string key = ob.key() + (accepting ? "|1" : "|0");
    auto [it, inserted] = index.emplace(std::move(key), static_cast<NodeId>(states.size()));
    if (inserted) {
      if (states.size() >= opts.state_cap) {
        throw ResourceLimitError("progression automaton exceeded " +
                                 std::to_string(opts.state_cap) + " states");
      }
      states.push_back({std::move(ob), accepting});
    }
    return it->second;
  };

  intern(normalize(f), false);
  for (std::size_t u = 0; u < states.size(); ++u) {
    for (Symbol s = 0; s < k; ++s) {
      Formula ob = states[u].obligation;
      bool end = holds_at_end(ob, s);
      NodeId v = intern(progress(ob, s), end);
      table.push_back(v);
    }
  }
  std::vector<bool> acc(states.size());
  for (std::size_t u = 0; u < states.size(); ++u) acc[u] = states[u].accepting;
  return minimize(Dfa(ap, states.size(), 0, std::move(acc), std::move(table)));
}

}  // namespace agcl
