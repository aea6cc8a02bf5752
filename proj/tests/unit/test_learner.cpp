#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "agcl/compile.hpp"
#include "agcl/error.hpp"
#include "agcl/gridworld.hpp"
#include "agcl/learner.hpp"
#include "test_support.hpp"

using namespace agcl;

namespace {

const PropositionSet kAp({"tree", "rock", "pogo"});

// 2x1 strip holding one tree, so the agent always starts next to it.
TaskConfig trivial_task() {
  TaskConfig t;
  t.id = "trivial";
  t.s0.values = {2, 1, 1, 0, 0, 0, 0};
  t.sf.values = {2, 1, 0, 1, 0, 0, 0};
  return t;
}

EnvFactory trivial_env() {
  auto spec = test::pogo_spec(1, 12);
  return [spec] {
    return std::make_unique<Gridworld>(spec, GridworldSchema{}, kAp, trivial_task());
  };
}

EnvFactory pogo_env(const Dfa& monitor) {
  auto spec = test::pogo_spec();
  return [spec, &monitor] {
    return std::make_unique<Gridworld>(spec, GridworldSchema{}, kAp, test::pogo_target(), &monitor);
  };
}

Architecture small_arch() { return default_architecture(kObservationSize, kActionCount); }

QParams vec(std::vector<double> v) {
  QParams p;
  p.arch.layers = {1, 1};  // 1*1 weight + 1 bias
  p.values = std::move(v);
  return p;
}

std::size_t tree_policy(const Observation& o) {
  return static_cast<std::size_t>(o[0] < 1.0 ? Action::Break : Action::RotateRight);
}

DqnHyper quick_hyper() {
  DqnHyper h;
  h.eval_every = 1000;
  h.eval_episodes = 50;
  h.learning_starts = 500;
  h.success_threshold = 0.95;
  return h;
}

}  // namespace

TEST(Network, ParamCountAndInit) {
  auto arch = small_arch();
  EXPECT_EQ(arch.layers, (std::vector<std::size_t>{42, 64, 64, 5}));
  EXPECT_EQ(arch.param_count(), 42u * 64 + 64 + 64 * 64 + 64 + 64 * 5 + 5);
  auto p = init_params(arch, 7);
  EXPECT_EQ(p.values.size(), arch.param_count());
  EXPECT_EQ(p, init_params(arch, 7));
  EXPECT_NE(p, init_params(arch, 8));
  const double bound = std::sqrt(6.0 / 42.0);
  for (std::size_t k = 0; k < 42 * 64; ++k) EXPECT_LE(std::abs(p.values[k]), bound);
  for (std::size_t k = 42 * 64; k < 42 * 64 + 64; ++k) EXPECT_EQ(p.values[k], 0.0);
}

TEST(Network, HandComputedForward) {
  // 2 -> 2 (ReLU) -> 1
  QParams p;
  p.arch.layers = {2, 2, 1};
  p.values = {1, -1,   // input 0 -> hidden
              2, 1,    // input 1 -> hidden
              0, 0.5,  // hidden bias
              3, -2,   // hidden -> out
              0.25};
  QNetwork net(p.arch);
  std::vector<double> x = {1, 1};
  // hidden = relu(1+2, -1+1+0.5) = (3, 0.5); out = 9 - 1 + 0.25
  EXPECT_DOUBLE_EQ(net.forward(p, x)[0], 8.25);
  x = {-1, 0};
  // hidden = relu(-1, 1.5) = (0, 1.5); out = -3 + 0.25
  EXPECT_DOUBLE_EQ(net.forward(p, x)[0], -2.75);
}

TEST(Network, HuberBothRegimes) {
  EXPECT_DOUBLE_EQ(huber(0.5), 0.125);
  EXPECT_DOUBLE_EQ(huber(-3.0), 2.5);
  EXPECT_DOUBLE_EQ(huber(1.0), 0.5);
}

TEST(Network, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EXPECT_LT(gradient_check({{6, 8, 7, 3}}, seed), 1e-4) << "seed " << seed;
  }
  EXPECT_LT(gradient_check({{5, 4, 2}}, 11, 1), 1e-4);
}

TEST(Params, BinaryRoundTrip) {
  auto p = init_params(small_arch(), 99);
  std::stringstream ss;
  write_params(ss, p);
  const auto bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 4), "AGQP");
  EXPECT_EQ(bytes.size(), 4 + 4 + 4 + 8 * 4 + 8 + 8 + 8 * p.values.size() + 8);
  // version 1, little-endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
  EXPECT_EQ(bytes[5], 0);
  std::stringstream in(bytes);
  EXPECT_EQ(read_params(in), p);
}

TEST(Params, CorruptionDetected) {
  auto p = init_params(small_arch(), 3);
  std::stringstream ss;
  write_params(ss, p);
  auto bytes = ss.str();
  bytes[100] = static_cast<char>(bytes[100] ^ 0x10);
  std::stringstream bad(bytes);
  EXPECT_THROW(read_params(bad), SchemaError);
  std::stringstream cut(ss.str().substr(0, 50));
  EXPECT_THROW(read_params(cut), SchemaError);
  std::stringstream wrong("XXXX0000");
  EXPECT_THROW(read_params(wrong), SchemaError);
}

TEST(Transfer, SequenceIsExactCopy) {
  auto p = init_params(small_arch(), 5);
  auto c = transfer_sequence(transfer_sequence(transfer_sequence(p)));
  EXPECT_EQ(c.values, p.values);
  double diff = 0;
  for (std::size_t k = 0; k < p.values.size(); ++k) diff = std::max(diff, std::abs(c.values[k] - p.values[k]));
  EXPECT_EQ(diff, 0.0);
  auto other = default_architecture(42, 5, {32});
  EXPECT_THROW(transfer_sequence(p, other), PreconditionError);
}

TEST(Transfer, WeightedHandExample) {
  auto a = vec({1, 3});
  auto b = vec({5, 7});
  auto out = transfer_weighted({{&a, 0.6}, {&b, 0.4}});
  EXPECT_NEAR(out.values[0], 2.6, 1e-15);
  EXPECT_NEAR(out.values[1], 4.6, 1e-15);
}

TEST(Transfer, WeightedSingleAndIdenticalSources) {
  auto p = init_params(small_arch(), 12);
  EXPECT_EQ(transfer_weighted({{&p, 1.0}}).values, transfer_sequence(p).values);
  auto q = p;
  for (double beta : {0.0, 0.17, 0.5, 0.93, 1.0}) {
    EXPECT_EQ(transfer_weighted({{&p, beta}, {&q, 1 - beta}}).values, p.values);
  }
}

TEST(Transfer, WeightedIsLinear) {
  auto a = init_params(small_arch(), 1);
  auto b = init_params(small_arch(), 2);
  for (double beta : {0.1, 0.25, 0.6, 0.99}) {
    auto out = transfer_weighted({{&a, beta}, {&b, 1 - beta}});
    for (std::size_t k = 0; k < a.values.size(); ++k) {
      const double expect = beta * a.values[k] + (1 - beta) * b.values[k];
      EXPECT_NEAR(out.values[k], expect, 4 * std::numeric_limits<double>::epsilon() *
                                             std::max({1.0, std::abs(a.values[k]), std::abs(b.values[k])}));
    }
  }
}

TEST(Transfer, WeightedPreconditions) {
  auto a = vec({1, 3});
  auto b = vec({5, 7});
  EXPECT_THROW(transfer_weighted({{&a, 0.6}, {&b, 0.5}}), PreconditionError);
  EXPECT_THROW(transfer_weighted({{&a, 1.2}, {&b, -0.2}}), PreconditionError);
  EXPECT_NO_THROW(transfer_weighted({{&a, 0.6}, {&b, 0.4 + 5e-10}}));
  auto c = init_params(small_arch(), 1);
  EXPECT_THROW(transfer_weighted({{&a, 0.5}, {&c, 0.5}}), PreconditionError);
  EXPECT_THROW(transfer_weighted({}), PreconditionError);
}

TEST(Gsrs, BonusFollowsAcceptDistance) {
  const PropositionSet ap({"tree", "rock"});
  auto dfa = compile_dfa(parse_ltlf(test::kTreeRockFormula, ap), ap);
  GsrsShaper shaper(dfa, 1.0);
  EXPECT_DOUBLE_EQ(shaper.bonus(dfa.initial()), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(shaper.bonus(dfa.accepting_nodes().front()), 1.0);
  GsrsShaper scaled(dfa, 2.5);
  EXPECT_DOUBLE_EQ(scaled.bonus(dfa.accepting_nodes().front()), 2.5);

  const PropositionSet ap2({"p", "r"});
  auto until = compile_dfa(parse_ltlf("!p U r", ap2), ap2);
  const NodeId trap = until.step(until.initial(), 0b01);  // p without r
  EXPECT_FALSE(accept_distance(until, trap).has_value());
  EXPECT_EQ(GsrsShaper(until, 1.0).bonus(trap), 0.0);

  StepOutcome o;
  EXPECT_EQ(shaper(o), 0.0);  // no monitor
  o.monitor_node = dfa.initial();
  EXPECT_DOUBLE_EQ(shaper(o), 1.0 / 3.0);
}

TEST(Evaluate, HandPolicySolvesTrivialEnv) {
  auto r = evaluate_policy(tree_policy, trivial_env(), 100, 1);
  EXPECT_EQ(r.success_rate, 1.0);
  EXPECT_LE(r.steps, 300u);  // at most two rotations and a break
}

TEST(Evaluate, RandomParamsFailHardTask) {
  const auto monitor = compile_dfa(parse_ltlf(test::kPogoFormula, kAp), kAp);
  auto p = init_params(small_arch(), 2024);
  auto r = evaluate(p, pogo_env(monitor), 100, 5);
  EXPECT_LE(r.success_rate, 0.1);
  EXPECT_EQ(evaluate(p, pogo_env(monitor), 100, 5).success_rate, r.success_rate);
}

TEST(Train, BudgetZeroRejected) {
  EXPECT_THROW(train(trivial_env(), init_params(small_arch(), 1), 0, DqnHyper{}, 1), PreconditionError);
  auto wrong = init_params(default_architecture(10, 5), 1);
  EXPECT_THROW(train(trivial_env(), wrong, 10, DqnHyper{}, 1), PreconditionError);
}

TEST(Train, ZeroLearningRateLeavesParamsUnchanged) {
  auto h = quick_hyper();
  h.learning_rate = 0;
  h.learning_starts = 64;
  h.early_stop = false;
  h.eval_episodes = 1;
  auto init = init_params(small_arch(), 4);
  auto rep = train(trivial_env(), init, 2000, h, 9);
  EXPECT_GT(rep.updates, 0u);
  EXPECT_EQ(rep.params.values, init.values);
}

TEST(Train, ReportInvariants) {
  auto h = quick_hyper();
  h.early_stop = false;
  auto rep = train(trivial_env(), init_params(small_arch(), 4), 3000, h, 9);
  EXPECT_EQ(rep.steps, 3000u);
  EXPECT_TRUE(rep.budget_exhausted);
  ASSERT_FALSE(rep.episodes.empty());
  std::size_t prev = 0, total = 0;
  for (const auto& e : rep.episodes) {
    EXPECT_GT(e.end_step, prev);
    prev = e.end_step;
    total += e.length;
    if (e.success) EXPECT_GE(e.ret, 1000.0 - 500.0);
  }
  EXPECT_LE(total, rep.steps);
  ASSERT_EQ(rep.evals.size(), 4u);  // 0, 1000, 2000, 3000
  EXPECT_EQ(rep.evals.front().step, 0u);
  EXPECT_EQ(rep.evals.back().step, 3000u);
  EXPECT_GT(rep.eval_steps, 0u);
}

TEST(Train, LearnsTrivialTask) {
  auto h = quick_hyper();
  auto rep = train(trivial_env(), init_params(small_arch(), 21), 20'000, h, 21);
  ASSERT_FALSE(rep.evals.empty());
  EXPECT_TRUE(rep.reached_threshold);
  EXPECT_GE(rep.evals.back().success_rate, 0.95);
  EXPECT_GE(evaluate(rep.params, trivial_env(), 100, 77).success_rate, 0.95);
  EXPECT_FALSE(rep.budget_exhausted);
}

TEST(Train, Deterministic) {
  auto h = quick_hyper();
  h.early_stop = false;
  auto a = train(trivial_env(), init_params(small_arch(), 3), 2500, h, 17);
  auto b = train(trivial_env(), init_params(small_arch(), 3), 2500, h, 17);
  EXPECT_EQ(a, b);
  auto c = train(trivial_env(), init_params(small_arch(), 3), 2500, h, 18);
  EXPECT_NE(a.params.values, c.params.values);
}

TEST(Train, CopyThenNoTrainingKeepsBehaviour) {
  auto h = quick_hyper();
  auto src = train(trivial_env(), init_params(small_arch(), 21), 20'000, h, 21).params;
  auto copy = transfer_sequence(src);
  auto a = evaluate(src, trivial_env(), 50, 3);
  auto b = evaluate(copy, trivial_env(), 50, 3);
  EXPECT_EQ(a.success_rate, b.success_rate);
  EXPECT_EQ(a.steps, b.steps);
}

TEST(Train, ShaperChangesOnlyTrainingSignal) {
  auto h = quick_hyper();
  h.early_stop = false;
  h.eps_start = h.eps_end = 1.0;  // actions independent of the network
  RewardShaper bonus = [](const StepOutcome&) { return 5.0; };
  auto plain = train(trivial_env(), init_params(small_arch(), 3), 1500, h, 17);
  auto shaped = train(trivial_env(), init_params(small_arch(), 3), 1500, h, 17, bonus);
  EXPECT_EQ(plain.episodes, shaped.episodes);
  EXPECT_NE(plain.params.values, shaped.params.values);
}

TEST(Hyper, JsonRoundTripAndUnknownKeys) {
  DqnHyper h;
  h.batch = 32;
  h.hidden = {16, 16};
  EXPECT_EQ(hyper_from_json(hyper_to_json(h)), h);
  try {
    hyper_from_json(nlohmann::json{{"batchsize", 3}});
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "learner.batchsize");
  }
  EXPECT_THROW(hyper_from_json(nlohmann::json{{"gamma", 1.5}}), SchemaError);
  EXPECT_THROW(hyper_from_json(nlohmann::json{{"batch", 0}}), SchemaError);
}
