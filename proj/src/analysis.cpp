#include "vrpg/analysis.hpp"

#include <limits>
#include <vector>

namespace vrpg {

namespace {

void check_tabular_policy(const TabularMdpSpec& spec, const Policy& policy,
                          const ParamVector& theta) {
  if (policy.state_dim() != 1 || policy.action_count() != spec.action_count) {
    throw ConfigError("policy shape does not match the tabular MDP (" +
                      std::to_string(spec.state_count) + " states, " +
                      std::to_string(spec.action_count) + " actions)");
  }
  policy.check_params(theta);
}

// pi(. | s) for every state, row-major [s * n_a + a].
std::vector<double> policy_table(const TabularMdpSpec& spec, const Policy& policy,
                                 const ParamVector& theta) {
  const auto na = static_cast<std::size_t>(spec.action_count);
  std::vector<double> table(static_cast<std::size_t>(spec.state_count) * na);
  for (int s = 0; s < spec.state_count; ++s) {
    const double obs = s;
    policy.action_distribution(theta, std::span<const double>(&obs, 1),
                               std::span<double>(table.data() + s * na, na));
  }
  return table;
}

// Q_h(s, a) for h = 0..H-1, each table indexed [s * n_a + a].
std::vector<std::vector<double>> q_tables(const TabularMdpSpec& spec,
                                          const std::vector<double>& pi, double gamma) {
  const int ns = spec.state_count;
  const int na = spec.action_count;
  const auto H = static_cast<std::size_t>(spec.horizon);
  std::vector<std::vector<double>> q(H, std::vector<double>(static_cast<std::size_t>(ns) * na));
  std::vector<double> v_next(static_cast<std::size_t>(ns), 0.0);
  for (std::size_t h = H; h-- > 0;) {
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < na; ++a) {
        double cont = 0.0;
        if (h + 1 < H) {
          for (int s2 = 0; s2 < ns; ++s2) cont += spec.transition(s, a, s2) * v_next[s2];
        }
        q[h][s * na + a] = spec.reward(s, a) + gamma * cont;
      }
    }
    for (int s = 0; s < ns; ++s) {
      double v = 0.0;
      for (int a = 0; a < na; ++a) v += pi[s * na + a] * q[h][s * na + a];
      v_next[s] = v;
    }
  }
  return q;
}

struct MomentAccumulator {
  ParamVector first;
  double second = 0.0;

  explicit MomentAccumulator(std::size_t d)
      : first(ParamVector::Zero(static_cast<Eigen::Index>(d))) {}
  void add(const ParamVector& g, double p) {
    first += p * g;
    second += p * g.squaredNorm();
  }
  EstimatorMoments finish() const { return {first, second - first.squaredNorm()}; }
};

}  // namespace

std::size_t enumeration_bound(const TabularMdpSpec& spec) {
  const std::size_t base =
      static_cast<std::size_t>(spec.state_count) * static_cast<std::size_t>(spec.action_count);
  std::size_t total = 1;
  for (int h = 0; h < spec.horizon; ++h) {
    if (base != 0 && total > std::numeric_limits<std::size_t>::max() / base) {
      return std::numeric_limits<std::size_t>::max();
    }
    total *= base;
  }
  return total;
}

std::size_t enumerate_trajectories(
    const TabularMdpSpec& spec, const Policy& policy, const ParamVector& theta,
    const std::function<void(const Trajectory&, double probability)>& visit, std::size_t cap) {
  check_tabular_policy(spec, policy, theta);
  const std::size_t bound = enumeration_bound(spec);
  if (bound > cap) {
    throw ArgumentError("trajectory enumeration needs cap >= " + std::to_string(bound) +
                        " (current cap " + std::to_string(cap) + ")");
  }
  const auto pi = policy_table(spec, policy, theta);
  const int na = spec.action_count;
  const auto H = static_cast<std::size_t>(spec.horizon);

  Trajectory traj;
  traj.state_dim = 1;
  traj.terminal = true;
  std::size_t count = 0;

  // Depth-first over (s_h, a_h) with the running probability.
  std::function<void(std::size_t, int, double)> descend = [&](std::size_t h, int s, double prob) {
    for (int a = 0; a < na; ++a) {
      const double pa = prob * pi[s * na + a];
      if (pa == 0.0) continue;
      traj.states.push_back(s);
      traj.actions.push_back(a);
      traj.rewards.push_back(spec.reward(s, a));
      if (h + 1 == H) {
        visit(traj, pa);
        ++count;
      } else {
        for (int s2 = 0; s2 < spec.state_count; ++s2) {
          const double p2 = spec.transition(s, a, s2);
          if (p2 > 0.0) descend(h + 1, s2, pa * p2);
        }
      }
      traj.states.pop_back();
      traj.actions.pop_back();
      traj.rewards.pop_back();
    }
  };
  if (H == 0) return 0;
  for (int s0 = 0; s0 < spec.state_count; ++s0) {
    if (spec.initial[s0] > 0.0) descend(0, s0, spec.initial[s0]);
  }
  return count;
}

double exact_value(const TabularMdpSpec& spec, const Policy& policy, const ParamVector& theta,
                   double gamma) {
  check_tabular_policy(spec, policy, theta);
  if (spec.horizon == 0) return 0.0;
  const auto pi = policy_table(spec, policy, theta);
  const auto q = q_tables(spec, pi, gamma);
  const int na = spec.action_count;
  double value = 0.0;
  for (int s = 0; s < spec.state_count; ++s) {
    double v = 0.0;
    for (int a = 0; a < na; ++a) v += pi[s * na + a] * q[0][s * na + a];
    value += spec.initial[s] * v;
  }
  return value;
}

ParamVector exact_gradient_recursive(const TabularMdpSpec& spec, const Policy& policy,
                                     const ParamVector& theta, double gamma) {
  check_tabular_policy(spec, policy, theta);
  ParamVector grad = ParamVector::Zero(static_cast<Eigen::Index>(policy.param_dim()));
  if (spec.horizon == 0) return grad;
  const auto pi = policy_table(spec, policy, theta);
  const auto q = q_tables(spec, pi, gamma);
  const int ns = spec.state_count;
  const int na = spec.action_count;

  // d_h(s): probability of being in s at step h.
  std::vector<double> d(spec.initial.begin(), spec.initial.end());
  double discount = 1.0;
  for (int h = 0; h < spec.horizon; ++h) {
    for (int s = 0; s < ns; ++s) {
      if (d[s] == 0.0) continue;
      const double obs = s;
      for (int a = 0; a < na; ++a) {
        const double w = discount * d[s] * pi[s * na + a] * q[h][s * na + a];
        if (w != 0.0) {
          policy.accumulate_score(theta, std::span<const double>(&obs, 1), a, w, grad);
        }
      }
    }
    std::vector<double> next(static_cast<std::size_t>(ns), 0.0);
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < na; ++a) {
        const double m = d[s] * pi[s * na + a];
        for (int s2 = 0; s2 < ns; ++s2) next[s2] += m * spec.transition(s, a, s2);
      }
    }
    d = std::move(next);
    discount *= gamma;
  }
  return grad;
}

ExactGradientReport exact_gradient(const TabularMdpSpec& spec, const Policy& policy,
                                   const ParamVector& theta, double gamma,
                                   const std::optional<ParamVector>& theta_behavior,
                                   std::size_t cap) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ArgumentError("gamma must lie in (0, 1]");
  ExactGradientReport report;
  report.gradient = exact_gradient_recursive(spec, policy, theta, gamma);
  report.value = exact_value(spec, policy, theta, gamma);

  const std::size_t d = policy.param_dim();
  MomentAccumulator rf(d), gp(d);
  report.trajectory_count = enumerate_trajectories(
      spec, policy, theta,
      [&](const Trajectory& traj, double p) {
        report.total_probability += p;
        report.enumerated_value += p * discounted_return(traj, gamma);
        rf.add(reinforce_contrib(policy, theta, traj, gamma), p);
        gp.add(gpomdp_contrib(policy, theta, traj, gamma), p);
      },
      cap);
  report.reinforce = rf.finish();
  report.gpomdp = gp.finish();

  if (theta_behavior) {
    MomentAccumulator orf(d), ogp(d);
    enumerate_trajectories(
        spec, policy, *theta_behavior,
        [&](const Trajectory& traj, double p) {
          orf.add(offpolicy_reinforce_contrib(policy, theta, *theta_behavior, traj, gamma), p);
          ogp.add(offpolicy_gpomdp_contrib(policy, theta, *theta_behavior, traj, gamma), p);
        },
        cap);
    report.offpolicy_reinforce = orf.finish();
    report.offpolicy_gpomdp = ogp.finish();
  }
  return report;
}

double estimator_variance(const TabularMdpSpec& spec, const Policy& policy,
                          const ParamVector& theta, double gamma, EstimatorKind kind,
                          const std::optional<ParamVector>& theta_behavior, std::size_t cap) {
  MomentAccumulator acc(policy.param_dim());
  const ParamVector& sampling = theta_behavior ? *theta_behavior : theta;
  enumerate_trajectories(
      spec, policy, sampling,
      [&](const Trajectory& traj, double p) {
        if (theta_behavior) {
          acc.add(offpolicy_contribution(kind, policy, theta, *theta_behavior, traj, gamma, {}), p);
        } else {
          acc.add(contribution(kind, policy, theta, traj, gamma), p);
        }
      },
      cap);
  return acc.finish().variance_trace;
}

}  // namespace vrpg
