#pragma once

#include <string>
#include <vector>

namespace agcl {

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// DFA semantics against the reference evaluator over all short traces.
SelftestResult check_dfa_semantics(std::size_t max_len = 6, std::size_t random_traces = 10'000);
/// F(tree) & F(rock): 4 states, 1 accepting, 2 trace paths.
SelftestResult check_tree_rock_dfa();
/// Jump telescoping on random lists and the inverse-jump weight example.
SelftestResult check_jump_algebra(std::size_t lists = 1000);
/// Copy/blend transfer exactness and analytic vs numeric gradients.
SelftestResult check_transfer_and_gradients();

/// All checks above; `quick` shortens trace lengths.
std::vector<SelftestResult> run_selftests(bool quick = false);

}  // namespace agcl
