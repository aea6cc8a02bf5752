#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "agcl/ltlf.hpp"

namespace agcl {

using NodeId = std::uint32_t;

/// Complete deterministic automaton over the alphabet 2^AP.
///
/// The transition table is dense: `alphabet_size()` successors per node. Nodes
/// are numbered breadth-first from the initial node (symbols visited in
/// increasing bitmask order), which makes numbering a function of the
/// language alone once the automaton is minimal.
class Dfa {
 public:
  Dfa() = default;
  Dfa(PropositionSet ap, std::size_t node_count, NodeId initial, std::vector<bool> accepting,
      std::vector<NodeId> transitions);

  const PropositionSet& propositions() const noexcept { return ap_; }
  std::size_t node_count() const noexcept { return accepting_.size(); }
  Symbol alphabet_size() const noexcept { return ap_.alphabet_size(); }
  NodeId initial() const noexcept { return initial_; }
  bool is_accepting(NodeId n) const { return accepting_.at(n); }
  std::size_t accepting_count() const noexcept;
  std::vector<NodeId> accepting_nodes() const;

  NodeId step(NodeId node, Symbol symbol) const;
  bool accepts(std::span<const Symbol> trace) const;

  std::span<const NodeId> row(NodeId node) const {
    return {transitions_.data() + static_cast<std::size_t>(node) * alphabet_size(), alphabet_size()};
  }

  bool operator==(const Dfa&) const = default;

 private:
  PropositionSet ap_;
  NodeId initial_ = 0;
  std::vector<bool> accepting_;
  std::vector<NodeId> transitions_;
};

struct MonitorStep {
  NodeId node;
  bool accepted;
};

/// One synchronous monitor update after an environment step.
MonitorStep advance_monitor(const Dfa& dfa, NodeId node, Symbol labels);

/// A simple path through progress edges. `labels[i]` lists the single
/// propositions (AP indices) whose singleton symbol moves nodes[i] to nodes[i+1].
struct TracePath {
  std::vector<NodeId> nodes;
  std::vector<std::vector<std::size_t>> labels;

  std::size_t transitions() const noexcept { return labels.size(); }
  bool operator==(const TracePath&) const = default;
};

/// Edges between distinct nodes that at least one single-proposition symbol
/// triggers. Self-loops and edges reachable only through multi-proposition
/// (or empty) symbols are not progress edges.
struct ProgressEdge {
  NodeId to;
  std::vector<std::size_t> propositions;
};
std::vector<ProgressEdge> progress_edges(const Dfa& dfa, NodeId from);

/// All simple progress-edge paths from the initial node that end on their
/// first accepting node, in lexicographic order of node sequences.
std::vector<TracePath> get_trace_paths(const Dfa& dfa);

std::vector<NodeId> occ(const TracePath& path);

/// Progress-edge distance to the nearest accepting node; nullopt if none is
/// reachable.
std::optional<std::size_t> accept_distance(const Dfa& dfa, NodeId node);
std::vector<std::optional<std::size_t>> accept_distances(const Dfa& dfa);

/// Compact boolean predicate over AP covering exactly `symbols`.
std::string symbol_predicate(std::span<const Symbol> symbols, const PropositionSet& ap);

std::string export_dot(const Dfa& dfa);

/// Adjacency list keyed by node index, with predicates and raw symbol lists.
nlohmann::json dfa_to_json(const Dfa& dfa);
Dfa dfa_from_json(const nlohmann::json& j);

}  // namespace agcl
