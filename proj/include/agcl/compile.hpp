#pragma once

#include <cstddef>

#include "agcl/dfa.hpp"
#include "agcl/ltlf.hpp"

namespace agcl {

struct CompileOptions {
  /// Upper bound on states of the unminimized progression automaton.
  std::size_t state_cap = 10'000;
};

/// Compiles an LTLf formula into a complete minimal DFA over 2^AP.
///
/// States of the intermediate automaton are pairs (normalized obligation,
/// accept-if-trace-ends-here); the initial state carries `false` because the
/// empty trace satisfies nothing. The result is Hopcroft-minimized and
/// renumbered canonically. Throws ResourceLimitError past `state_cap`.
Dfa compile_dfa(const Formula& f, const PropositionSet& ap, const CompileOptions& opts = {});

/// Hopcroft partition refinement followed by canonical BFS renumbering.
/// Unreachable nodes are dropped.
Dfa minimize(const Dfa& dfa);

}  // namespace agcl
