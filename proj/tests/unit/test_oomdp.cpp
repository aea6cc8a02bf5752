#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "agcl/compile.hpp"
#include "agcl/error.hpp"
#include "agcl/oomdp.hpp"
#include "agcl/rng.hpp"
#include "test_support.hpp"

using namespace agcl;

namespace {

constexpr std::size_t kWidth = 0, kHeight = 1, kTreesEnv = 2, kTreesInv = 3, kRocksEnv = 4,
                      kRocksInv = 5, kTable = 6;

Dfa pogo_dfa() {
  PropositionSet ap({"tree", "rock", "pogo"});
  return compile_dfa(parse_ltlf(test::kPogoFormula, ap), ap);
}

Dfa fig1_dfa() {
  PropositionSet ap({"tree", "rock"});
  return compile_dfa(parse_ltlf(test::kTreeRockFormula, ap), ap);
}

// Path whose first labels spell `word` (AP indices).
TracePath path_starting_with(const Dfa& dfa, std::vector<std::size_t> word) {
  for (const auto& p : get_trace_paths(dfa)) {
    bool ok = p.labels.size() >= word.size();
    for (std::size_t i = 0; ok && i < word.size(); ++i) ok = p.labels[i].front() == word[i];
    if (ok) return p;
  }
  ADD_FAILURE() << "no path with requested prefix";
  return {};
}

// Every point of the declared integer grid, ignoring node requirements.
std::vector<OomdpState> full_grid(const OomdpSpec& spec) {
  std::vector<OomdpState> out{OomdpState{}};
  for (const auto& p : spec.params()) {
    std::vector<OomdpState> next;
    for (const auto& s : out) {
      for (double v = p.lo; v <= p.hi; v += 1) {
        auto t = s;
        t.values.push_back(v);
        next.push_back(std::move(t));
      }
    }
    out = std::move(next);
  }
  return out;
}

std::set<OomdpState> initial_states(const std::vector<TaskConfig>& tasks) {
  std::set<OomdpState> out;
  for (const auto& t : tasks) out.insert(t.s0);
  return out;
}

}  // namespace

TEST(OomdpSpec, FlattensParametersInDeclarationOrder) {
  auto spec = test::pogo_spec();
  ASSERT_EQ(spec.param_count(), 7u);
  EXPECT_EQ(spec.param(kTreesInv).name, "trees_inv");
  EXPECT_EQ(spec.index_of("table_env"), kTable);
  EXPECT_FALSE(spec.find("nope"));
  EXPECT_TRUE(spec.is_inventory(kTreesInv));
  EXPECT_FALSE(spec.is_inventory(kTreesEnv));
  EXPECT_FALSE(spec.has_real_params());
  EXPECT_THROW(spec.index_of("nope"), SchemaError);
}

TEST(OomdpSpec, RejectsInvalidRanges) {
  EXPECT_THROW(OomdpSpec({{"c", {{"a", ParamKind::Integer, 3, 2}}}}, {}), SchemaError);
  EXPECT_THROW(OomdpSpec({{"c", {{"a", ParamKind::Integer, 0.5, 2}}}}, {}), SchemaError);
  EXPECT_THROW(OomdpSpec({{"c", {{"a", ParamKind::Integer, 0, 1}, {"a", ParamKind::Integer, 0, 1}}}}, {}),
               SchemaError);
  EXPECT_NO_THROW(OomdpSpec({{"c", {{"a", ParamKind::Real, 0.5, 2}}}}, {}));
}

TEST(OomdpSpec, RejectsBadBindings) {
  std::vector<ClassSpec> classes = {{"c", {{"e", ParamKind::Integer, 0, 2}, {"i", ParamKind::Integer, 0, 2}}}};
  EXPECT_THROW(OomdpSpec(classes, {{"p", "e", "missing", false, {}}}), SchemaError);
  EXPECT_THROW(OomdpSpec(classes, {{"p", "e", "i", false, {}}, {"p", "e", "i", false, {}}}),
               SchemaError);
  EXPECT_THROW(OomdpSpec(classes, {{"p", "", "", true, {{"zzz", 1}}}}), SchemaError);

  OomdpSpec ok(classes, {{"p", "e", "i", false, {}}});
  EXPECT_NO_THROW(ok.validate_bindings(PropositionSet({"p"})));
  EXPECT_THROW(ok.validate_bindings(PropositionSet({"p", "q"})), SchemaError);
  EXPECT_THROW(ok.validate_bindings(PropositionSet({"q"})), SchemaError);
}

TEST(TasksForNode, FirstTreeNodeNeedsOneTree) {
  auto dfa = fig1_dfa();
  auto spec = test::pogo_spec();
  auto target = test::pogo_target();
  auto path = path_starting_with(dfa, {0});
  auto tasks = tasks_for_node(dfa, path, 1, spec, target);
  ASSERT_FALSE(tasks.empty());
  for (const auto& t : tasks) {
    EXPECT_GE(t.s0[kTreesEnv], 1);
    EXPECT_EQ(t.s0[kTreesInv], 0);
    EXPECT_EQ(t.sf[kTreesInv], 1);
    EXPECT_EQ(t.sf[kTreesEnv], t.s0[kTreesEnv] - 1);
    EXPECT_FALSE(t.is_target);
  }
  // 7 widths * 7 heights * 4 tree counts * 3 rock counts * 2 table counts
  EXPECT_EQ(tasks.size(), 7u * 7 * 4 * 3 * 2);
}

TEST(TasksForNode, InitialNodeIsDegenerate) {
  auto dfa = pogo_dfa();
  auto spec = test::pogo_spec();
  auto path = get_trace_paths(dfa).front();
  auto tasks = tasks_for_node(dfa, path, 0, spec, test::pogo_target());
  EXPECT_EQ(tasks.size(), 7u * 7 * 5 * 3 * 2);
  for (const auto& t : tasks) EXPECT_EQ(t.s0, t.sf);
}

TEST(TasksForNode, AcceptingNodeReturnsTarget) {
  auto dfa = pogo_dfa();
  auto target = test::pogo_target();
  for (const auto& path : get_trace_paths(dfa)) {
    auto tasks = tasks_for_node(dfa, path, path.nodes.size() - 1, test::pogo_spec(), target);
    ASSERT_EQ(tasks.size(), 1u);
    EXPECT_TRUE(tasks[0].is_target);
    EXPECT_TRUE(tasks[0].same_task(target));
  }
}

TEST(TasksForNode, TwoTreePrefixMatchesBruteForceFilter) {
  auto dfa = pogo_dfa();
  auto spec = test::pogo_spec();
  auto target = test::pogo_target();
  auto path = path_starting_with(dfa, {0, 0});
  auto tasks = tasks_for_node(dfa, path, 2, spec, target);

  std::set<OomdpState> expected;
  for (const auto& s : full_grid(spec)) {
    if (s[kTreesEnv] >= 2 && s[kTreesInv] == target.s0[kTreesInv] &&
        s[kRocksInv] == target.s0[kRocksInv]) {
      expected.insert(s);
    }
  }
  EXPECT_EQ(tasks.size(), 7u * 7 * 3 * 3 * 2);
  EXPECT_EQ(initial_states(tasks), expected);
  EXPECT_EQ(tasks.size(), expected.size());
}

TEST(TasksForNode, DifferencesEqualPrefixMultiset) {
  auto dfa = pogo_dfa();
  auto spec = test::pogo_spec();
  auto target = test::pogo_target();
  for (const auto& path : get_trace_paths(dfa)) {
    std::vector<double> expected(spec.param_count(), 0.0);
    for (std::size_t k = 1; k + 1 < path.nodes.size(); ++k) {
      auto prop = path.labels[k - 1].front();
      if (prop == 0) {
        expected[kTreesEnv] -= 1;
        expected[kTreesInv] += 1;
      } else if (prop == 1) {
        expected[kRocksEnv] -= 1;
        expected[kRocksInv] += 1;
      }
      for (const auto& t : tasks_for_node(dfa, path, k, spec, target)) {
        for (std::size_t i = 0; i < spec.param_count(); ++i) {
          EXPECT_EQ(t.sf[i] - t.s0[i], expected[i]) << "param " << i << " node " << k;
        }
      }
    }
  }
}

TEST(TasksForNode, LongerPrefixIsSubsetOfShorter) {
  auto dfa = pogo_dfa();
  auto spec = test::pogo_spec();
  auto target = test::pogo_target();
  for (const auto& path : get_trace_paths(dfa)) {
    auto prev = initial_states(tasks_for_node(dfa, path, 0, spec, target));
    for (std::size_t k = 1; k + 1 < path.nodes.size(); ++k) {
      auto cur = initial_states(tasks_for_node(dfa, path, k, spec, target));
      EXPECT_TRUE(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
      EXPECT_LT(cur.size(), prev.size());
      prev = std::move(cur);
    }
  }
}

TEST(TasksForNode, TerminalRequirementApplies) {
  // A pogo-first path does not exist, but a terminal binding's requirement
  // still constrains the node reached after it.
  PropositionSet ap({"pogo"});
  auto dfa = compile_dfa(parse_ltlf("F pogo & F(pogo & X pogo)", ap), ap);
  auto spec = test::pogo_spec();
  auto path = get_trace_paths(dfa).front();
  ASSERT_GE(path.nodes.size(), 3u);
  for (const auto& t : tasks_for_node(dfa, path, 1, spec, test::pogo_target())) {
    EXPECT_EQ(t.s0[kTable], 1);
    EXPECT_EQ(t.s0, t.sf);
  }
}

TEST(TasksForNode, InfeasibleWhenRequirementExceedsRange) {
  auto dfa = pogo_dfa();
  std::vector<ClassSpec> classes = {
      {"world", {{"width", ParamKind::Integer, 6, 6}, {"height", ParamKind::Integer, 6, 6}}},
      {"tree", {{"trees_env", ParamKind::Integer, 0, 1}, {"trees_inv", ParamKind::Integer, 0, 4}}},
      {"rock", {{"rocks_env", ParamKind::Integer, 0, 2}, {"rocks_inv", ParamKind::Integer, 0, 2}}},
      {"table", {{"table_env", ParamKind::Integer, 0, 1}}},
  };
  OomdpSpec spec(classes, test::pogo_spec().bindings());
  auto path = path_starting_with(dfa, {0, 0});
  EXPECT_NO_THROW(tasks_for_node(dfa, path, 1, spec, test::pogo_target()));
  EXPECT_THROW(tasks_for_node(dfa, path, 2, spec, test::pogo_target()), InfeasibleError);
}

TEST(TasksForNode, GridCapAndFilter) {
  auto dfa = pogo_dfa();
  auto spec = test::pogo_spec();
  auto path = get_trace_paths(dfa).front();
  NodeTaskOptions tight;
  tight.grid_cap = 10;
  EXPECT_THROW(tasks_for_node(dfa, path, 1, spec, test::pogo_target(), tight), ResourceLimitError);

  NodeTaskOptions square;
  square.filter = [](const OomdpState& s) { return s[kWidth] == s[kHeight]; };
  auto tasks = tasks_for_node(dfa, path, 1, spec, test::pogo_target(), square);
  EXPECT_FALSE(tasks.empty());
  for (const auto& t : tasks) EXPECT_EQ(t.s0[kWidth], t.s0[kHeight]);
  auto size = node_grid_size(dfa, path, 1, spec, test::pogo_target());
  ASSERT_TRUE(size);
  EXPECT_EQ(*size * 1, 7.0 * tasks.size());
}

TEST(TasksForNode, PlacementSeedsDependOnStateAndBase) {
  auto dfa = pogo_dfa();
  auto path = get_trace_paths(dfa).front();
  NodeTaskOptions a, b;
  a.seed = 1;
  b.seed = 2;
  auto ta = tasks_for_node(dfa, path, 1, test::pogo_spec(), test::pogo_target(), a);
  auto ta2 = tasks_for_node(dfa, path, 1, test::pogo_spec(), test::pogo_target(), a);
  auto tb = tasks_for_node(dfa, path, 1, test::pogo_spec(), test::pogo_target(), b);
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    EXPECT_EQ(ta[i].placement_seed, ta2[i].placement_seed);
    EXPECT_NE(ta[i].placement_seed, tb[i].placement_seed);
    seeds.insert(ta[i].placement_seed);
  }
  EXPECT_EQ(seeds.size(), ta.size());
}

TEST(TasksForNode, RealParametersRequireSampling) {
  auto dfa = pogo_dfa();
  auto classes = test::pogo_spec().classes();
  classes[0].params[0].kind = ParamKind::Real;
  OomdpSpec spec(classes, test::pogo_spec().bindings());
  auto path = get_trace_paths(dfa).front();
  EXPECT_THROW(tasks_for_node(dfa, path, 1, spec, test::pogo_target()), PreconditionError);
  EXPECT_FALSE(node_grid_size(dfa, path, 1, spec, test::pogo_target()));
}

TEST(SampleNodeTasks, ContinuousWidthGivesDistinctInRangeConfigs) {
  auto dfa = pogo_dfa();
  auto classes = test::pogo_spec().classes();
  classes[0].params = {{"width", ParamKind::Real, 2, 4}, {"height", ParamKind::Real, 2, 4}};
  OomdpSpec spec(classes, test::pogo_spec().bindings());
  auto target = test::pogo_target(3);
  auto path = path_starting_with(dfa, {0});
  auto tasks = sample_node_tasks(dfa, path, 1, spec, target, 25, 7);
  ASSERT_EQ(tasks.size(), 25u);
  auto states = initial_states(tasks);
  EXPECT_EQ(states.size(), 25u);
  for (const auto& t : tasks) {
    EXPECT_GE(t.s0[kWidth], 2.0);
    EXPECT_LE(t.s0[kWidth], 4.0);
    EXPECT_GE(t.s0[kTreesEnv], 1);
    EXPECT_EQ(t.sf[kTreesInv], 1);
  }
  EXPECT_TRUE(std::is_sorted(tasks.begin(), tasks.end(),
                             [](const TaskConfig& a, const TaskConfig& b) { return a.s0 < b.s0; }));
}

TEST(SampleNodeTasks, DeterministicAndSingleSample) {
  auto dfa = pogo_dfa();
  auto spec = test::pogo_spec();
  auto path = get_trace_paths(dfa).front();
  auto a = sample_node_tasks(dfa, path, 2, spec, test::pogo_target(), 25, 11);
  auto b = sample_node_tasks(dfa, path, 2, spec, test::pogo_target(), 25, 11);
  auto c = sample_node_tasks(dfa, path, 2, spec, test::pogo_target(), 25, 12);
  EXPECT_EQ(initial_states(a), initial_states(b));
  EXPECT_NE(initial_states(a), initial_states(c));

  auto one = sample_node_tasks(dfa, path, 2, spec, test::pogo_target(), 1, 3);
  ASSERT_EQ(one.size(), 1u);
  auto all = initial_states(tasks_for_node(dfa, path, 2, spec, test::pogo_target()));
  EXPECT_TRUE(all.count(one[0].s0));
  EXPECT_THROW(sample_node_tasks(dfa, path, 2, spec, test::pogo_target(), 0, 3), PreconditionError);
}

TEST(SampleNodeTasks, SamplesLieInEnumeratedSet) {
  auto dfa = pogo_dfa();
  auto spec = test::pogo_spec();
  for (const auto& path : get_trace_paths(dfa)) {
    for (std::size_t k = 0; k + 1 < path.nodes.size(); ++k) {
      auto all = tasks_for_node(dfa, path, k, spec, test::pogo_target());
      auto sample = sample_node_tasks(dfa, path, k, spec, test::pogo_target(), 25, k);
      for (const auto& t : sample) {
        auto it = std::find_if(all.begin(), all.end(),
                               [&](const TaskConfig& x) { return x.same_task(t); });
        EXPECT_NE(it, all.end());
      }
    }
  }
}

TEST(SampleNodeTasks, RegionSmallerThanSampleThrows) {
  auto dfa = pogo_dfa();
  auto spec = test::pogo_spec(6, 6);
  auto path = path_starting_with(dfa, {0, 0});
  auto region = tasks_for_node(dfa, path, 2, spec, test::pogo_target(6)).size();
  EXPECT_NO_THROW(sample_node_tasks(dfa, path, 2, spec, test::pogo_target(6), region, 1));
  EXPECT_THROW(sample_node_tasks(dfa, path, 2, spec, test::pogo_target(6), region + 1, 1),
               ResourceLimitError);

  NodeTaskOptions none;
  none.filter = [](const OomdpState&) { return false; };
  EXPECT_THROW(sample_node_tasks(dfa, path, 2, spec, test::pogo_target(6), 1, 1, none),
               ResourceLimitError);
}

TEST(RangeNoise, MatchesGaussianDraws) {
  OomdpSpec spec({{"world", {{"width", ParamKind::Real, 6, 12}}}}, {});
  auto noisy = apply_range_noise(spec, 99);
  Rng rng(99);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double g1 = gauss(rng);
  double g2 = gauss(rng);
  EXPECT_DOUBLE_EQ(noisy.param(0).lo, std::max(0.0, 6 - g1));
  EXPECT_DOUBLE_EQ(noisy.param(0).hi, std::max(std::max(0.0, 6 - g1), 12 + g2));
}

TEST(RangeNoise, ZeroWidthUnchangedAndDeterministic) {
  OomdpSpec spec({{"c", {{"a", ParamKind::Integer, 3, 3}, {"b", ParamKind::Integer, 6, 12}}}}, {});
  auto a = apply_range_noise(spec, 5);
  auto b = apply_range_noise(spec, 5);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.param(0).lo, 3);
  EXPECT_EQ(a.param(0).hi, 3);
}

TEST(RangeNoise, IntegerRangesStayValid) {
  auto spec = test::pogo_spec();
  bool changed = false;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto n = apply_range_noise(spec, seed);
    for (std::size_t i = 0; i < n.param_count(); ++i) {
      const auto& p = n.param(i);
      EXPECT_EQ(p.lo, std::floor(p.lo));
      EXPECT_EQ(p.hi, std::floor(p.hi));
      EXPECT_GE(p.lo, 0);
      EXPECT_LE(p.lo, p.hi);
      changed |= p.lo != spec.param(i).lo || p.hi != spec.param(i).hi;
    }
    EXPECT_EQ(n.bindings(), spec.bindings());
  }
  EXPECT_TRUE(changed);
}

TEST(OomdpJson, SpecRoundTrip) {
  auto spec = test::pogo_spec();
  auto j = spec_to_json(spec);
  EXPECT_EQ(spec_from_json(j), spec);
  EXPECT_EQ(spec_from_json(nlohmann::json::parse(j.dump())), spec);
}

TEST(OomdpJson, SchemaErrorsCarryPath) {
  auto j = spec_to_json(test::pogo_spec());
  auto bad = j;
  bad["extra"] = 1;
  try {
    spec_from_json(bad);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "oomdp.extra");
  }
  bad = j;
  bad["classes"][0]["params"][0]["range"] = {1};
  EXPECT_THROW(spec_from_json(bad), SchemaError);
  bad = j;
  bad["classes"][0]["params"][0]["kind"] = "complex";
  EXPECT_THROW(spec_from_json(bad), SchemaError);
  bad = j;
  bad["bindings"][0].erase("env");
  EXPECT_THROW(spec_from_json(bad), SchemaError);
}

TEST(OomdpJson, StateRoundTripAndValidation) {
  auto spec = test::pogo_spec();
  auto target = test::pogo_target();
  auto j = state_to_json(spec, target.s0);
  EXPECT_EQ(j["trees_env"], 2);
  EXPECT_EQ(state_from_json(spec, j, "target.s0"), target.s0);
  auto missing = j;
  missing.erase("rocks_env");
  EXPECT_THROW(state_from_json(spec, missing, "target.s0"), SchemaError);
  auto unknown = j;
  unknown["gold"] = 1;
  EXPECT_THROW(state_from_json(spec, unknown, "target.s0"), SchemaError);
  auto fractional = j;
  fractional["width"] = 6.5;
  EXPECT_THROW(state_from_json(spec, fractional, "target.s0"), SchemaError);

  auto tj = task_to_json(spec, target);
  EXPECT_EQ(tj["is_target"], true);
  EXPECT_EQ(tj["sf"]["trees_inv"], 2);
}
