#include "support.hpp"
#include "vrpg/mdp.hpp"
#include "vrpg/policy.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace vrpg {
namespace {

Trajectory make_traj(std::vector<double> rewards) {
  Trajectory t;
  t.state_dim = 1;
  t.states.assign(rewards.size(), 0.0);
  t.actions.assign(rewards.size(), 0);
  t.rewards = std::move(rewards);
  return t;
}

TEST(DiscountedReturn, MatchesHandSum) {
  const Trajectory t = make_traj({1.0, 2.0, -1.0});
  EXPECT_DOUBLE_EQ(discounted_return(t, 0.5), 1.0 + 0.5 * 2.0 - 0.25);
  EXPECT_DOUBLE_EQ(discounted_return(t, 1.0), 2.0);
  EXPECT_EQ(discounted_return(make_traj({}), 0.9), 0.0);
}

TEST(DiscountSpec, RejectsOutOfRange) {
  EXPECT_THROW(DiscountSpec(0.0), ArgumentError);
  EXPECT_THROW(DiscountSpec(1.0), ArgumentError);
  EXPECT_THROW(DiscountSpec(-0.3), ArgumentError);
  EXPECT_DOUBLE_EQ(DiscountSpec(0.99).gamma(), 0.99);
}

TEST(SampleIndex, InverseCdfBoundaries) {
  const std::vector<double> p{0.2, 0.5, 0.3};
  EXPECT_EQ(sample_index(p, 0.0), 0);
  EXPECT_EQ(sample_index(p, 0.1999), 0);
  EXPECT_EQ(sample_index(p, 0.2), 1);
  EXPECT_EQ(sample_index(p, 0.6999), 1);
  EXPECT_EQ(sample_index(p, 0.7), 2);
  EXPECT_EQ(sample_index(p, 0.99999), 2);
}

TEST(SampleIndex, RoundingShortfallFallsOnLastPositiveEntry) {
  const std::vector<double> p{0.5, 0.4999999, 0.0};
  EXPECT_EQ(sample_index(p, 0.99999999), 1);
  EXPECT_THROW(sample_index(std::vector<double>{0.0, 0.0}, 0.5), NumericError);
}

// Replays a rollout by hand: the trajectory sub-stream feeds reset, then
// alternately the action draw and the transition draw.
TEST(Rollout, ReplaysTheSubStreamByHand) {
  const TabularMdpSpec spec = test::load_fixture("chain.mdp");
  TabularEnv env(spec);
  TabularSoftmaxPolicy policy(2, 2);
  ParamVector theta(4);
  theta << 0.3, -0.2, 0.5, 1.0;

  Rng rng = Rng::stream(11, StreamTag::kTrajectory, 0, 0);
  const Trajectory traj = rollout(env, policy, theta, rng);

  Rng replay = Rng::stream(11, StreamTag::kTrajectory, 0, 0);
  int s = sample_index(spec.initial, replay.uniform());
  ASSERT_EQ(traj.length(), 3u);
  for (std::size_t h = 0; h < 3; ++h) {
    EXPECT_EQ(traj.state(h)[0], s);
    const double obs = s;
    const auto pi = policy.action_distribution(theta, std::span<const double>(&obs, 1));
    const int a = sample_index(pi, replay.uniform());
    EXPECT_EQ(traj.actions[h], a);
    EXPECT_EQ(traj.rewards[h], spec.reward(s, a));
    s = sample_index(spec.next_state_probs(s, a), replay.uniform());
  }
  EXPECT_TRUE(traj.terminal);
}

TEST(Rollout, StopsAtTerminalState) {
  CartPoleEnv env;
  MlpSoftmaxPolicy policy({4, 2});
  ParamVector theta = ParamVector::Zero(static_cast<Eigen::Index>(policy.param_dim()));
  theta[9] = 50.0;  // bias of action 1: always push right, the pole falls early
  Rng rng(3);
  const Trajectory traj = rollout(env, policy, theta, rng);
  EXPECT_LT(traj.length(), 200u);
  EXPECT_TRUE(traj.terminal);
  EXPECT_EQ(traj.total_reward(), static_cast<double>(traj.length()));
}

TEST(Rollout, ShapeMismatchIsAConfigError) {
  CartPoleEnv env;
  MlpSoftmaxPolicy policy({6, 3});
  Rng rng(0);
  const ParamVector theta = ParamVector::Zero(static_cast<Eigen::Index>(policy.param_dim()));
  EXPECT_THROW(rollout(env, policy, theta, rng), ConfigError);
}

TEST(SampleBatch, IndependentOfThreadCount) {
  CartPoleEnv env;
  MlpSoftmaxPolicy policy({4, 8, 2});
  Rng init(5);
  const ParamVector theta = policy.initial_params(init);
  const auto one = sample_batch(env, policy, theta, 17, {9, 4}, 1);
  const auto three = sample_batch(env, policy, theta, 17, {9, 4}, 3);
  ASSERT_EQ(one.size(), three.size());
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_TRUE(one[i] == three[i]);
  const auto other = sample_batch(env, policy, theta, 17, {9, 5}, 1);
  EXPECT_FALSE(one[0] == other[0]);
}

TEST(SampleBatch, RejectsEmptyBatch) {
  CartPoleEnv env;
  MlpSoftmaxPolicy policy({4, 2});
  const ParamVector theta = ParamVector::Zero(static_cast<Eigen::Index>(policy.param_dim()));
  EXPECT_THROW(sample_batch(env, policy, theta, 0, {0, 0}), ArgumentError);
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw NumericError("boom");
                            }),
               NumericError);
}

}  // namespace
}  // namespace vrpg
