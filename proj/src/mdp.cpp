#include "vrpg/mdp.hpp"

#include "vrpg/policy.hpp"

#include <cmath>
#include <numeric>

namespace vrpg {

double Trajectory::total_reward() const noexcept {
  return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

DiscountSpec::DiscountSpec(double gamma) : gamma_(gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ArgumentError("discount factor must lie in (0, 1), got " + std::to_string(gamma));
  }
}

double discounted_return(const Trajectory& traj, double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (double r : traj.rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

int sample_index(std::span<const double> probs, double u) {
  double cumulative = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_positive = static_cast<int>(i);
    cumulative += probs[i];
    if (u < cumulative) return static_cast<int>(i);
  }
  if (last_positive < 0) throw NumericError("sample_index: distribution has no positive mass");
  return last_positive;
}

Trajectory rollout(Environment& env, const Policy& policy, const ParamVector& theta, Rng& rng) {
  policy.check_params(theta);
  if (policy.state_dim() != env.state_dim() || policy.action_count() != env.action_count()) {
    throw ConfigError("policy shape (" + std::to_string(policy.state_dim()) + " -> " +
                      std::to_string(policy.action_count()) + ") does not match environment '" +
                      env.name() + "' (" + std::to_string(env.state_dim()) + " -> " +
                      std::to_string(env.action_count()) + ")");
  }
  const std::size_t dim = env.state_dim();
  const auto horizon = static_cast<std::size_t>(env.horizon());

  Trajectory traj;
  traj.state_dim = dim;
  traj.states.reserve(horizon * dim);
  traj.actions.reserve(horizon);
  traj.rewards.reserve(horizon);

  std::vector<double> obs(dim);
  std::vector<double> probs(static_cast<std::size_t>(env.action_count()));
  env.reset(rng, obs);
  for (std::size_t h = 0; h < horizon; ++h) {
    policy.action_distribution(theta, obs, probs);
    const int action = sample_index(probs, rng.uniform());
    traj.states.insert(traj.states.end(), obs.begin(), obs.end());
    traj.actions.push_back(action);
    const StepResult res = env.step(action, rng, obs);
    traj.rewards.push_back(res.reward);
    if (res.terminal) {
      traj.terminal = true;
      break;
    }
  }
  return traj;
}

std::vector<Trajectory> sample_batch(const Environment& env, const Policy& policy,
                                     const ParamVector& theta, std::size_t n, BatchKey key,
                                     int threads) {
  if (n == 0) throw ArgumentError("sample_batch: batch size must be at least 1");
  policy.check_params(theta);
  std::vector<Trajectory> batch(n);
  parallel_for(n, threads, [&](std::size_t i) {
    auto local = env.clone();
    Rng rng = Rng::stream(key.master_seed, StreamTag::kTrajectory, key.batch_counter, i);
    batch[i] = rollout(*local, policy, theta, rng);
  });
  return batch;
}

}  // namespace vrpg
