#include "support.hpp"
#include "vrpg/optimizers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace vrpg {
namespace {

OptimizerConfig base_config(Algorithm algo) {
  OptimizerConfig c;
  c.algorithm = algo;
  c.eta = 0.2;
  c.large_batch = 12;
  c.small_batch = 3;
  c.inner_length = 4;
  c.alpha = 0.5;
  c.switch_prob = SwitchSchedule::constant(0.3);
  c.gamma = 0.95;
  c.max_updates = 25;
  return c;
}

struct Chain {
  TabularEnv env{test::load_fixture("chain.mdp")};
  TabularSoftmaxPolicy policy{2, 2};
};

bool bit_equal(const ParamVector& a, const ParamVector& b) {
  return a.size() == b.size() && std::equal(a.data(), a.data() + a.size(), b.data());
}

TEST(Algorithms, ParseAndPrintNames) {
  for (const auto& name : algorithm_names()) EXPECT_EQ(to_string(parse_algorithm(name)), name);
  EXPECT_EQ(parse_algorithm("PAGE_PG"), Algorithm::kPagePg);
  try {
    parse_algorithm("adam");
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("storm-pg"), std::string::npos);
  }
}

TEST(OptimizerConfig, Validation) {
  auto bad = [](auto mutate) {
    OptimizerConfig c = base_config(Algorithm::kPagePg);
    mutate(c);
    return c;
  };
  EXPECT_NO_THROW(base_config(Algorithm::kPagePg).validate());
  EXPECT_THROW(bad([](auto& c) { c.eta = -1; }).validate(), ArgumentError);
  EXPECT_THROW(bad([](auto& c) { c.large_batch = 0; }).validate(), ArgumentError);
  EXPECT_THROW(bad([](auto& c) { c.small_batch = 20; }).validate(), ArgumentError);
  EXPECT_THROW(bad([](auto& c) { c.switch_prob = SwitchSchedule::constant(0.0); }).validate(), ArgumentError);
  EXPECT_THROW(bad([](auto& c) { c.max_updates = 0; }).validate(), ArgumentError);
  EXPECT_THROW(bad([](auto& c) { c.gamma = 1.5; }).validate(), ArgumentError);
  EXPECT_NO_THROW(bad([](auto& c) {
                    c.switch_prob = SwitchSchedule::constant(0.0);
                    c.allow_degenerate = true;
                  }).validate());

  OptimizerConfig storm = base_config(Algorithm::kStormPg);
  storm.alpha = 1.0;
  EXPECT_THROW(storm.validate(), ArgumentError);
  storm.allow_degenerate = true;
  EXPECT_NO_THROW(storm.validate());
  storm.alpha = 1.5;
  EXPECT_THROW(storm.validate(), ArgumentError);

  OptimizerConfig sv = base_config(Algorithm::kSvrpg);
  sv.inner_length = 0;
  EXPECT_THROW(sv.validate(), ArgumentError);

  OptimizerConfig vanilla = base_config(Algorithm::kGpomdp);
  vanilla.small_batch = 0;  // unused by the vanilla method
  EXPECT_NO_THROW(vanilla.validate());
}

TEST(SwitchSchedule, ConstantAndRamp) {
  EXPECT_EQ(SwitchSchedule::constant(0.4).at(0.7), 0.4);
  const auto ramp = SwitchSchedule::ramp(0.01, 0.4);
  EXPECT_DOUBLE_EQ(ramp.at(0.0), 0.01);
  EXPECT_DOUBLE_EQ(ramp.at(1.0), 0.4);
  EXPECT_DOUBLE_EQ(ramp.at(0.5), 0.205);
  EXPECT_DOUBLE_EQ(ramp.at(2.0), 0.4);
}

TEST(Optimizer, RampProgressFollowsUpdates) {
  Chain c;
  OptimizerConfig cfg = base_config(Algorithm::kPagePg);
  cfg.switch_prob = SwitchSchedule::ramp(0.1, 0.5);
  cfg.max_updates = 10;
  Optimizer opt(c.env, c.policy, cfg, 1, ParamVector::Zero(4));
  opt.initialize();
  EXPECT_DOUBLE_EQ(opt.current_switch_prob(), 0.1);
  for (int i = 0; i < 5; ++i) opt.step();
  EXPECT_DOUBLE_EQ(opt.current_switch_prob(), 0.3);
}

void expect_lockstep(const OptimizerConfig& a, const OptimizerConfig& b, std::size_t steps) {
  Chain c;
  Optimizer x(c.env, c.policy, a, 77, ParamVector::Zero(4));
  Optimizer y(c.env, c.policy, b, 77, ParamVector::Zero(4));
  x.initialize();
  y.initialize();
  for (std::size_t t = 0; t < steps; ++t) {
    x.step();
    y.step();
    ASSERT_TRUE(bit_equal(x.state().theta, y.state().theta)) << "iteration " << t;
    ASSERT_TRUE(bit_equal(x.state().v, y.state().v)) << "iteration " << t;
  }
}

TEST(Reductions, StormAlphaOneIsVanillaSmallBatch) {
  OptimizerConfig storm = base_config(Algorithm::kStormPg);
  storm.alpha = 1.0;
  storm.allow_degenerate = true;
  storm.large_batch = storm.small_batch = 3;
  OptimizerConfig vanilla = base_config(Algorithm::kGpomdp);
  vanilla.large_batch = 3;
  expect_lockstep(storm, vanilla, 25);
}

TEST(Reductions, StormAlphaZeroIsSrvrpg) {
  OptimizerConfig storm = base_config(Algorithm::kStormPg);
  storm.alpha = 0.0;
  storm.allow_degenerate = true;
  OptimizerConfig srvrpg = base_config(Algorithm::kSrvrpg);
  srvrpg.inner_length = 100;
  expect_lockstep(storm, srvrpg, 25);
}

TEST(Reductions, PageOneIsVanillaFullBatch) {
  OptimizerConfig page = base_config(Algorithm::kPagePg);
  page.switch_prob = SwitchSchedule::constant(1.0);
  OptimizerConfig vanilla = base_config(Algorithm::kGpomdp);
  expect_lockstep(page, vanilla, 25);
}

TEST(Optimizer, ZeroStepSizeIsAFixedPoint) {
  Chain c;
  for (Algorithm algo : {Algorithm::kGpomdp, Algorithm::kSvrpg, Algorithm::kSrvrpg,
                         Algorithm::kStormPg, Algorithm::kPagePg}) {
    OptimizerConfig cfg = base_config(algo);
    cfg.eta = 0.0;
    ParamVector theta0(4);
    theta0 << 0.1, 0.2, -0.3, 0.4;
    const RunResult r = run_optimizer(c.env, c.policy, cfg, 5, theta0);
    EXPECT_TRUE(bit_equal(r.final_state.theta, theta0)) << to_string(algo);
  }
}

TEST(Optimizer, ZeroEstimateLeavesThetaUnchanged) {
  // Zero rewards make every contribution, and so every v, exactly zero.
  TabularMdpSpec spec = test::load_fixture("chain.mdp");
  std::fill(spec.rewards.begin(), spec.rewards.end(), 0.0);
  TabularEnv env(spec);
  TabularSoftmaxPolicy policy(2, 2);
  ParamVector theta0(4);
  theta0 << 0.5, -0.5, 0.25, 0.0;
  const RunResult r = run_optimizer(env, policy, base_config(Algorithm::kPagePg), 9, theta0);
  EXPECT_TRUE(bit_equal(r.final_state.theta, theta0));
}

TEST(Optimizer, SvrpgEpochPattern) {
  Chain c;
  OptimizerConfig cfg = base_config(Algorithm::kSvrpg);
  cfg.inner_length = 3;
  cfg.max_updates = 7;
  const RunResult r = run_optimizer(c.env, c.policy, cfg, 2);
  std::vector<Branch> want{Branch::kSnapshot, Branch::kInner, Branch::kInner, Branch::kInner,
                           Branch::kSnapshot, Branch::kInner, Branch::kInner, Branch::kInner,
                           Branch::kSnapshot, Branch::kInner};
  ASSERT_EQ(r.log.size(), want.size());
  std::size_t updates = 0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(r.log[i].branch, want[i]) << i;
    EXPECT_EQ(r.log[i].updated, want[i] == Branch::kInner);
    EXPECT_EQ(r.log[i].episodes_used, want[i] == Branch::kSnapshot ? 12u : 3u);
    updates += r.log[i].updated ? 1 : 0;
    EXPECT_EQ(r.log[i].iteration, updates);
  }
}

TEST(Optimizer, EpisodeLedgerIsConsistent) {
  Chain c;
  for (Algorithm algo : {Algorithm::kGpomdp, Algorithm::kSvrpg, Algorithm::kSrvrpg,
                         Algorithm::kStormPg, Algorithm::kPagePg}) {
    const RunResult r = run_optimizer(c.env, c.policy, base_config(algo), 4);
    std::size_t sum = 0;
    std::size_t prev = 0;
    for (const auto& row : r.log) {
      sum += row.episodes_used;
      EXPECT_EQ(row.cum_episodes, sum);
      EXPECT_GT(row.cum_episodes, prev);
      prev = row.cum_episodes;
    }
    EXPECT_EQ(r.final_state.cum_episodes, sum);
    EXPECT_EQ(r.final_state.iteration, 25u);
  }
}

TEST(Optimizer, EpisodeBudgetStopsTheRun) {
  Chain c;
  OptimizerConfig cfg = base_config(Algorithm::kStormPg);
  cfg.max_updates = 0;
  cfg.episode_budget = 40;
  const RunResult r = run_optimizer(c.env, c.policy, cfg, 4);
  EXPECT_GE(r.final_state.cum_episodes, 40u);
  EXPECT_LT(r.final_state.cum_episodes, 40u + cfg.large_batch);
}

TEST(Optimizer, PageWithZeroProbabilityNeverRefreshes) {
  Chain c;
  OptimizerConfig cfg = base_config(Algorithm::kPagePg);
  cfg.switch_prob = SwitchSchedule::constant(0.0);
  cfg.allow_degenerate = true;
  const RunResult r = run_optimizer(c.env, c.policy, cfg, 4);
  for (std::size_t i = 1; i < r.log.size(); ++i) EXPECT_EQ(r.log[i].branch, Branch::kSmall);
}

TEST(Optimizer, ThreadsDoNotChangeTheRun) {
  CartPoleEnv env;
  MlpSoftmaxPolicy policy({4, 8, 2});
  OptimizerConfig cfg = base_config(Algorithm::kPagePg);
  cfg.eta = 0.01;
  cfg.max_updates = 8;
  const RunResult a = run_optimizer(env, policy, cfg, 3);
  cfg.threads = 3;
  const RunResult b = run_optimizer(env, policy, cfg, 3);
  EXPECT_TRUE(bit_equal(a.final_state.theta, b.final_state.theta));
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].avg_return, b.log[i].avg_return);
}

TEST(Optimizer, NonFiniteEstimateAbortsWithDiagnostic) {
  TabularMdpSpec spec;
  spec.state_count = 1;
  spec.action_count = 2;
  spec.horizon = 3;
  spec.reward_bound = 1e308;
  spec.initial = {1.0};
  spec.rewards = {1e308, 1e308};
  spec.transitions = {1.0, 1.0};
  TabularEnv env(spec);
  TabularSoftmaxPolicy policy(1, 2);
  const RunResult r = run_optimizer(env, policy, base_config(Algorithm::kGpomdp), 0);
  EXPECT_TRUE(r.diverged);
  EXPECT_EQ(r.log.size(), 1u);
  EXPECT_NE(r.diagnostic.find("non-finite"), std::string::npos);
}

TEST(Optimizer, StoresEveryKthIterate) {
  Chain c;
  OptimizerConfig cfg = base_config(Algorithm::kStormPg);
  cfg.store_every = 5;
  const RunResult r = run_optimizer(c.env, c.policy, cfg, 4);
  EXPECT_EQ(r.iterates.size(), 5u);
  EXPECT_TRUE(bit_equal(r.iterates.back(), r.final_state.theta));
}

TEST(SelectOutput, SingletonAndEmpty) {
  Rng rng(0);
  std::vector<ParamVector> one{ParamVector::Constant(2, 7.0)};
  EXPECT_EQ(select_output(one, rng)[0], 7.0);
  EXPECT_THROW(select_output(std::vector<ParamVector>{}, rng), ArgumentError);
}

TEST(SelectOutput, TwoIteratesSplitEvenly) {
  std::vector<ParamVector> two{ParamVector::Constant(1, 0.0), ParamVector::Constant(1, 1.0)};
  constexpr int kDraws = 10000;
  int ones = 0;
  for (int i = 0; i < kDraws; ++i) {
    Rng rng = Rng::stream(123, StreamTag::kOutput, static_cast<std::uint64_t>(i));
    ones += select_output(two, rng)[0] == 1.0 ? 1 : 0;
  }
  const double sigma = std::sqrt(kDraws * 0.25);
  EXPECT_LT(std::abs(ones - kDraws / 2.0), 4.0 * sigma);
}

TEST(AverageSamples, ClosedForm) {
  EXPECT_DOUBLE_EQ(average_samples(1.0, 100, 5, 10), 1000.0);
  EXPECT_DOUBLE_EQ(average_samples(0.0, 100, 5, 10), 50.0);
  EXPECT_NEAR(average_samples(1.0 / 100, 100, 5, 1000), 5950.0, 1e-9);
}

}  // namespace
}  // namespace vrpg
