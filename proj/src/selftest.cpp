#include "agcl/selftest.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <sstream>

#include "agcl/compile.hpp"
#include "agcl/curriculum.hpp"
#include "agcl/error.hpp"
#include "agcl/learner.hpp"

namespace agcl {

namespace {

const char* kPogoFormula =
    "G((tree -> !rock & !pogo) & (rock -> !tree & !pogo) & (pogo -> !rock & !tree)) & "
    "(!pogo U (tree & X(!pogo U tree))) & (!pogo U rock) & F pogo";

struct Case {
  const char* formula;
  std::vector<std::string> ap;
};

template <class Fn>
SelftestResult guarded(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {name, false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

SelftestResult check_dfa_semantics(std::size_t max_len, std::size_t random_traces) {
  return guarded("dfa_semantics", [&] {
    const std::vector<Case> suite = {{"F p", {"p"}},
                                     {"G p", {"p"}},
                                     {"!p U r", {"p", "r"}},
                                     {"F(tree) & F(rock)", {"tree", "rock"}},
                                     {kPogoFormula, {"tree", "rock", "pogo"}}};
    std::size_t checked = 0, bad = 0;
    for (const auto& c : suite) {
      PropositionSet ap(c.ap);
      auto f = parse_ltlf(c.formula, ap);
      auto dfa = compile_dfa(f, ap);
      const Symbol k = ap.alphabet_size();
      Trace t;
      std::function<void()> rec = [&] {
        if (!t.empty()) {
          ++checked;
          if (dfa.accepts(t) != eval_trace(f, t)) ++bad;
        }
        if (t.size() == max_len) return;
        for (Symbol s = 0; s < k; ++s) {
          t.push_back(s);
          rec();
          t.pop_back();
        }
      };
      rec();
      if (ap.size() == 3) {
        std::mt19937_64 rng(7);
        std::uniform_int_distribution<std::size_t> len(1, max_len);
        std::uniform_int_distribution<Symbol> sym(0, k - 1);
        for (std::size_t i = 0; i < random_traces; ++i) {
          Trace r(len(rng));
          for (auto& s : r) s = sym(rng);
          ++checked;
          if (dfa.accepts(r) != eval_trace(f, r)) ++bad;
        }
      }
    }
    std::ostringstream d;
    d << checked << " traces, " << bad << " mismatches";
    return SelftestResult{"dfa_semantics", bad == 0, d.str()};
  });
}

SelftestResult check_tree_rock_dfa() {
  return guarded("tree_rock_dfa", [] {
    PropositionSet ap({"tree", "rock"});
    auto dfa = compile_dfa(parse_ltlf("F(tree) & F(rock)", ap), ap);
    const auto paths = get_trace_paths(dfa);
    std::ostringstream d;
    d << dfa.node_count() << " states, " << dfa.accepting_count() << " accepting, " << paths.size()
      << " trace paths";
    return SelftestResult{"tree_rock_dfa",
                          dfa.node_count() == 4 && dfa.accepting_count() == 1 && paths.size() == 2, d.str()};
  });
}

SelftestResult check_jump_algebra(std::size_t lists) {
  return guarded("jump_algebra", [&] {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> value(0, 5);
    std::uniform_int_distribution<int> length(1, 6);
    auto state = [&] {
      OomdpState s;
      s.values.resize(7);
      for (auto& x : s.values) x = value(rng);
      return s;
    };
    double worst = 0;
    for (std::size_t trial = 0; trial < lists; ++trial) {
      auto target = std::make_shared<TaskConfig>(TaskConfig{"target", state(), state(), 0, true});
      std::vector<TaskRef> psi;
      const int n = length(rng);
      for (int k = 0; k + 1 < n; ++k) psi.push_back(std::make_shared<TaskConfig>(TaskConfig{"s", state(), state(), 0, false}));
      psi.push_back(target);
      const double pair_sum = avg_jump(psi, *target) * static_cast<double>(psi.size());
      const double expect = 0.5 * (2 - sim_t(*psi[0], *target) - sim_g(*psi[0], *target));
      worst = std::max(worst, std::abs(pair_sum - expect));
    }
    const std::vector<double> j = {0.2, 0.3};
    const auto beta = beta_weights(j);
    const bool beta_ok = std::abs(beta[0] + beta[1] - 1) <= 1e-12 && std::abs(beta[0] - 0.6) <= 1e-12 &&
                         std::abs(beta[1] - 0.4) <= 1e-12;
    std::ostringstream d;
    d << "max telescoping error " << worst << " over " << lists << " lists; beta(0.2,0.3) = (" << beta[0] << ", "
      << beta[1] << ")";
    return SelftestResult{"jump_algebra", worst <= 1e-9 && beta_ok, d.str()};
  });
}

SelftestResult check_transfer_and_gradients() {
  return guarded("transfer_and_gradients", [] {
    auto arch = default_architecture(42, 5);
    auto a = init_params(arch, 1);
    auto b = init_params(arch, 2);
    const bool copy_ok = transfer_sequence(a).values == a.values;
    double blend_err = 0;
    for (double beta : {0.1, 0.6, 0.9}) {
      auto out = transfer_weighted({{&a, beta}, {&b, 1 - beta}});
      for (std::size_t k = 0; k < a.values.size(); ++k) {
        const double expect = beta * a.values[k] + (1 - beta) * b.values[k];
        const double scale = std::max({1.0, std::abs(a.values[k]), std::abs(b.values[k])});
        blend_err = std::max(blend_err, std::abs(out.values[k] - expect) / scale);
      }
    }
    QParams x{{{1, 1}}, 0, {1, 3}}, y{{{1, 1}}, 0, {5, 7}};
    auto hand = transfer_weighted({{&x, 0.6}, {&y, 0.4}});
    const bool hand_ok = std::abs(hand.values[0] - 2.6) < 1e-15 && std::abs(hand.values[1] - 4.6) < 1e-15;
    double grad = 0;
    for (std::uint64_t s = 1; s <= 3; ++s) grad = std::max(grad, gradient_check({{6, 8, 7, 3}}, s));
    grad = std::max(grad, gradient_check({{42, 16, 16, 5}}, 9, 3));
    std::ostringstream d;
    d << "copy exact " << (copy_ok ? "yes" : "no") << ", blend rel err " << blend_err << ", hand case "
      << (hand_ok ? "ok" : "wrong") << ", gradient rel err " << grad;
    return SelftestResult{"transfer_and_gradients",
                          copy_ok && hand_ok && blend_err <= 4 * std::numeric_limits<double>::epsilon() && grad < 1e-4,
                          d.str()};
  });
}

std::vector<SelftestResult> run_selftests(bool quick) {
  return {check_dfa_semantics(quick ? 4 : 6, quick ? 1000 : 10'000), check_tree_rock_dfa(), check_jump_algebra(),
          check_transfer_and_gradients()};
}

}  // namespace agcl
