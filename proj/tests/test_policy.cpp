#include "support.hpp"
#include "vrpg/policy.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>

namespace vrpg {
namespace {

ParamVector central_difference(const Policy& policy, const ParamVector& theta,
                               std::span<const double> s, int a, double h = 1e-5) {
  ParamVector fd(theta.size());
  ParamVector probe = theta;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    probe[k] = theta[k] + h;
    const double up = policy.log_prob(probe, s, a);
    probe[k] = theta[k] - h;
    const double down = policy.log_prob(probe, s, a);
    probe[k] = theta[k];
    fd[k] = (up - down) / (2 * h);
  }
  return fd;
}

TEST(MlpPolicy, ParameterLayout) {
  MlpSoftmaxPolicy p({4, 32, 32, 2});
  EXPECT_EQ(p.param_dim(), 4u * 32 + 32 + 32 * 32 + 32 + 32 * 2 + 2);
  EXPECT_EQ(p.state_dim(), 4u);
  EXPECT_EQ(p.action_count(), 2);
  EXPECT_EQ(make_benchmark_mlp(6, 3)->param_dim(), 6u * 32 + 32 + 32 * 32 + 32 + 32 * 3 + 3);
}

TEST(MlpPolicy, LinearLayerLogitsByHand) {
  MlpSoftmaxPolicy p({2, 2});
  ParamVector theta(6);
  // W column-major: W(0,0), W(1,0), W(0,1), W(1,1), then b.
  theta << 1.0, 2.0, 3.0, 4.0, 0.5, -0.5;
  const std::vector<double> s{1.0, -1.0};
  std::vector<double> z(2);
  p.logits(theta, s, z);
  EXPECT_DOUBLE_EQ(z[0], 1.0 - 3.0 + 0.5);
  EXPECT_DOUBLE_EQ(z[1], 2.0 - 4.0 - 0.5);
}

TEST(MlpPolicy, GradientMatchesFiniteDifferences) {
  Rng rng(17);
  for (const auto& widths : {std::vector<int>{4, 32, 32, 2}, std::vector<int>{6, 32, 32, 3},
                             std::vector<int>{3, 5, 4}}) {
    MlpSoftmaxPolicy p(widths);
    for (int trial = 0; trial < 5; ++trial) {
      ParamVector theta = p.initial_params(rng);
      for (Eigen::Index k = 0; k < theta.size(); ++k) theta[k] += rng.uniform(-0.5, 0.5);
      std::vector<double> s(p.state_dim());
      for (double& x : s) x = rng.uniform(-2, 2);
      const int a = static_cast<int>(rng.below(p.action_count()));
      const ParamVector g = p.grad_log_prob(theta, s, a);
      const ParamVector fd = central_difference(p, theta, s, a);
      EXPECT_LT((g - fd).norm() / std::max(g.norm(), 1e-12), 1e-4);
    }
  }
}

TEST(MlpPolicy, ScoreIdentity) {
  MlpSoftmaxPolicy p({4, 16, 3});
  Rng rng(3);
  const ParamVector theta = p.initial_params(rng);
  const std::vector<double> s{0.3, -1.0, 2.0, 0.1};
  const auto pi = p.action_distribution(theta, s);
  ParamVector total = ParamVector::Zero(theta.size());
  for (int a = 0; a < 3; ++a) total += pi[a] * p.grad_log_prob(theta, s, a);
  EXPECT_LT(total.norm(), 1e-12);
}

TEST(MlpPolicy, AccumulateScoreScalesAndAdds) {
  MlpSoftmaxPolicy p({2, 3, 2});
  Rng rng(8);
  const ParamVector theta = p.initial_params(rng);
  const std::vector<double> s{0.5, -0.25};
  const ParamVector g = p.grad_log_prob(theta, s, 1);
  ParamVector acc = ParamVector::Ones(theta.size());
  p.accumulate_score(theta, s, 1, -2.5, acc);
  EXPECT_LT((acc - (ParamVector::Ones(theta.size()) - 2.5 * g)).norm(), 1e-14);
}

TEST(MlpPolicy, InitialisationBounds) {
  MlpSoftmaxPolicy p({4, 32, 2});
  Rng rng(0);
  const ParamVector theta = p.initial_params(rng);
  for (int k = 0; k < 4 * 32; ++k) EXPECT_LE(std::abs(theta[k]), 0.5);
  for (int k = 4 * 32; k < 4 * 32 + 32; ++k) EXPECT_EQ(theta[k], 0.0);
}

TEST(MlpPolicy, LargeLogitsStayFinite) {
  MlpSoftmaxPolicy p({1, 2});
  ParamVector theta(4);
  theta << 800.0, -800.0, 0.0, 0.0;
  const std::vector<double> s{1.0};
  const auto pi = p.action_distribution(theta, s);
  EXPECT_EQ(pi[0], 1.0);
  EXPECT_TRUE(std::isfinite(p.log_prob(theta, s, 1)));
  EXPECT_TRUE(p.grad_log_prob(theta, s, 1).allFinite());
}

TEST(Policy, ArgumentChecks) {
  MlpSoftmaxPolicy p({2, 2});
  const std::vector<double> s{0, 0};
  EXPECT_THROW(p.log_prob(ParamVector::Zero(3), s, 0), ConfigError);
  EXPECT_THROW(p.log_prob(ParamVector::Zero(6), s, 2), ArgumentError);
  ParamVector bad = ParamVector::Zero(6);
  bad[0] = std::nan("");
  EXPECT_THROW(p.log_prob(bad, s, 0), NumericError);
  EXPECT_THROW(MlpSoftmaxPolicy({3}), ArgumentError);
  EXPECT_THROW(TabularSoftmaxPolicy(0, 2), ArgumentError);
}

TEST(TabularPolicy, ScoreIsIndicatorMinusProbability) {
  TabularSoftmaxPolicy p(2, 3);
  ParamVector theta(6);
  theta << 0.1, 0.2, 0.3, -1.0, 0.0, 1.0;
  const double obs = 1;
  const std::span<const double> s(&obs, 1);
  const auto pi = p.action_distribution(theta, s);
  const double z = std::exp(-1.0) + 1.0 + std::exp(1.0);
  EXPECT_NEAR(pi[2], std::exp(1.0) / z, 1e-15);
  const ParamVector g = p.grad_log_prob(theta, s, 0);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[2], 0.0);
  EXPECT_NEAR(g[3], 1 - pi[0], 1e-15);
  EXPECT_NEAR(g[5], -pi[2], 1e-15);
  EXPECT_LT((g - central_difference(p, theta, s, 0)).norm(), 1e-9);
}

TEST(TabularPolicy, RejectsNonIntegerState) {
  TabularSoftmaxPolicy p(2, 2);
  const double obs = 0.5;
  EXPECT_THROW(p.log_prob(ParamVector::Zero(4), std::span<const double>(&obs, 1), 0), ArgumentError);
  const double far = 2;
  EXPECT_THROW(p.log_prob(ParamVector::Zero(4), std::span<const double>(&far, 1), 0), ArgumentError);
}

TEST(ParamSnapshot, RoundTripIsExact) {
  const auto dir = test::scratch_dir("snapshot");
  ParamVector theta(5);
  theta << 1.0, -0.0, 1e-300, 3.141592653589793, -7.5;
  save_params(dir / "t.theta", theta);
  const ParamVector back = load_params(dir / "t.theta");
  ASSERT_EQ(back.size(), 5);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(std::memcmp(&back[i], &theta[i], sizeof(double)), 0);
  EXPECT_EQ(std::filesystem::file_size(dir / "t.theta"), 8u + 8u + 5u * 8u);
}

TEST(ParamSnapshot, RejectsCorruptFiles) {
  const auto dir = test::scratch_dir("snapshot_bad");
  {
    std::ofstream out(dir / "bad.theta", std::ios::binary);
    out << "NOTMAGIC";
  }
  EXPECT_THROW(load_params(dir / "bad.theta"), ValidationError);
  save_params(dir / "ok.theta", ParamVector::Ones(3));
  std::filesystem::resize_file(dir / "ok.theta", 8 + 8 + 2 * 8);
  EXPECT_THROW(load_params(dir / "ok.theta"), ValidationError);
  EXPECT_THROW(load_params(dir / "missing.theta"), ConfigError);
}

}  // namespace
}  // namespace vrpg
