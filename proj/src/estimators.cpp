#include "vrpg/estimators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace vrpg {

namespace {

void check_trajectory(const Policy& policy, const Trajectory& traj) {
  if (traj.length() > 0 && traj.state_dim != policy.state_dim()) {
    throw ConfigError("trajectory state dimension " + std::to_string(traj.state_dim) +
                      " does not match policy input " + std::to_string(policy.state_dim()));
  }
  if (traj.rewards.size() != traj.actions.size() ||
      traj.states.size() != traj.actions.size() * traj.state_dim) {
    throw ConfigError("malformed trajectory: states, actions and rewards differ in length");
  }
}

ParamVector zeros(const Policy& policy) {
  return ParamVector::Zero(static_cast<Eigen::Index>(policy.param_dim()));
}

// log pi(a|s) without argument re-validation; `buf` has action_count entries.
double step_log_prob(const Policy& policy, const ParamVector& theta, std::span<const double> s,
                     int action, std::vector<double>& buf) {
  policy.logits(theta, s, buf);
  const double zmax = *std::max_element(buf.begin(), buf.end());
  double total = 0.0;
  for (double z : buf) total += std::exp(z - zmax);
  return buf[static_cast<std::size_t>(action)] - zmax - std::log(total);
}

// Per-step log(pi_target / pi_behavior).
std::vector<double> log_ratios(const Policy& policy, const ParamVector& theta_target,
                               const ParamVector& theta_behavior, const Trajectory& traj,
                               std::size_t steps) {
  std::vector<double> buf(static_cast<std::size_t>(policy.action_count()));
  std::vector<double> out(steps);
  for (std::size_t h = 0; h < steps; ++h) {
    const auto s = traj.state(h);
    const int a = traj.actions[h];
    out[h] = step_log_prob(policy, theta_target, s, a, buf) -
             step_log_prob(policy, theta_behavior, s, a, buf);
    if (!std::isfinite(out[h])) {
      throw NumericError("importance weight: non-finite log-ratio at step " + std::to_string(h));
    }
  }
  return out;
}

double clipped(double w, const WeightClip& clip) { return std::min(w, clip.max_weight); }

void check_pair(const Policy& policy, const ParamVector& a, const ParamVector& b,
                const Trajectory& traj) {
  policy.check_params(a);
  policy.check_params(b);
  check_trajectory(policy, traj);
}

}  // namespace

std::string to_string(EstimatorKind kind) {
  return kind == EstimatorKind::kReinforce ? "reinforce" : "gpomdp";
}

EstimatorKind parse_estimator_kind(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "reinforce") return EstimatorKind::kReinforce;
  if (lower == "gpomdp") return EstimatorKind::kGpomdp;
  throw ArgumentError("unknown estimator '" + name + "' (expected reinforce or gpomdp)");
}

ParamVector reinforce_contrib(const Policy& policy, const ParamVector& theta,
                              const Trajectory& traj, double gamma) {
  policy.check_params(theta);
  check_trajectory(policy, traj);
  ParamVector out = zeros(policy);
  if (traj.length() == 0) return out;
  const double ret = discounted_return(traj, gamma);
  if (ret == 0.0) return out;
  for (std::size_t h = 0; h < traj.length(); ++h) {
    policy.accumulate_score(theta, traj.state(h), traj.actions[h], ret, out);
  }
  return out;
}

// sum_h gamma^h r_h Z_h == sum_z score_z * (sum_{h >= z} gamma^h r_h): each
// score is visited once with its discounted reward-to-go as the scale.
ParamVector gpomdp_contrib(const Policy& policy, const ParamVector& theta, const Trajectory& traj,
                           double gamma) {
  policy.check_params(theta);
  check_trajectory(policy, traj);
  ParamVector out = zeros(policy);
  const std::size_t n = traj.length();
  if (n == 0) return out;
  std::vector<double> to_go(n);
  double discount = 1.0;
  for (std::size_t h = 0; h < n; ++h) {
    to_go[h] = discount * traj.rewards[h];
    discount *= gamma;
  }
  for (std::size_t h = n - 1; h-- > 0;) to_go[h] += to_go[h + 1];
  for (std::size_t h = 0; h < n; ++h) {
    if (to_go[h] != 0.0) policy.accumulate_score(theta, traj.state(h), traj.actions[h], to_go[h], out);
  }
  return out;
}

ParamVector contribution(EstimatorKind kind, const Policy& policy, const ParamVector& theta,
                         const Trajectory& traj, double gamma) {
  return kind == EstimatorKind::kReinforce ? reinforce_contrib(policy, theta, traj, gamma)
                                           : gpomdp_contrib(policy, theta, traj, gamma);
}

double weight_full(const Policy& policy, const ParamVector& theta_target,
                   const ParamVector& theta_behavior, const Trajectory& traj) {
  check_pair(policy, theta_target, theta_behavior, traj);
  const auto lr = log_ratios(policy, theta_target, theta_behavior, traj, traj.length());
  double log_w = 0.0;
  for (double v : lr) log_w += v;
  return std::exp(log_w);
}

double weight_truncated(const Policy& policy, const ParamVector& theta_target,
                        const ParamVector& theta_behavior, const Trajectory& traj, std::size_t h) {
  check_pair(policy, theta_target, theta_behavior, traj);
  if (h >= traj.length()) {
    throw ArgumentError("weight_truncated: step " + std::to_string(h) +
                        " beyond trajectory length " + std::to_string(traj.length()));
  }
  const auto lr = log_ratios(policy, theta_target, theta_behavior, traj, h + 1);
  double log_w = 0.0;
  for (double v : lr) log_w += v;
  return std::exp(log_w);
}

ParamVector offpolicy_reinforce_contrib(const Policy& policy, const ParamVector& theta_target,
                                        const ParamVector& theta_behavior,
                                        const Trajectory& traj, double gamma, WeightClip clip) {
  check_pair(policy, theta_target, theta_behavior, traj);
  ParamVector out = zeros(policy);
  if (traj.length() == 0) return out;
  const auto lr = log_ratios(policy, theta_target, theta_behavior, traj, traj.length());
  double log_w = 0.0;
  for (double v : lr) log_w += v;
  const double scale = clipped(std::exp(log_w), clip) * discounted_return(traj, gamma);
  if (scale == 0.0) return out;
  for (std::size_t h = 0; h < traj.length(); ++h) {
    policy.accumulate_score(theta_target, traj.state(h), traj.actions[h], scale, out);
  }
  return out;
}

// sum_h w_{0:h} gamma^h r_h Z_h, regrouped by score as in gpomdp_contrib.
ParamVector offpolicy_gpomdp_contrib(const Policy& policy, const ParamVector& theta_target,
                                     const ParamVector& theta_behavior, const Trajectory& traj,
                                     double gamma, WeightClip clip) {
  check_pair(policy, theta_target, theta_behavior, traj);
  ParamVector out = zeros(policy);
  const std::size_t n = traj.length();
  if (n == 0) return out;
  const auto lr = log_ratios(policy, theta_target, theta_behavior, traj, n);
  std::vector<double> to_go(n);
  double log_w = 0.0;
  double discount = 1.0;
  for (std::size_t h = 0; h < n; ++h) {
    log_w += lr[h];
    to_go[h] = clipped(std::exp(log_w), clip) * discount * traj.rewards[h];
    discount *= gamma;
  }
  for (std::size_t h = n - 1; h-- > 0;) to_go[h] += to_go[h + 1];
  for (std::size_t h = 0; h < n; ++h) {
    if (to_go[h] != 0.0) {
      policy.accumulate_score(theta_target, traj.state(h), traj.actions[h], to_go[h], out);
    }
  }
  return out;
}

ParamVector offpolicy_contribution(EstimatorKind kind, const Policy& policy,
                                   const ParamVector& theta_target,
                                   const ParamVector& theta_behavior, const Trajectory& traj,
                                   double gamma, WeightClip clip) {
  return kind == EstimatorKind::kReinforce
             ? offpolicy_reinforce_contrib(policy, theta_target, theta_behavior, traj, gamma, clip)
             : offpolicy_gpomdp_contrib(policy, theta_target, theta_behavior, traj, gamma, clip);
}

GradEstimate batch_mean(std::span<const ParamVector> contribs, EstimatorKind kind,
                        bool off_policy) {
  if (contribs.empty()) throw ArgumentError("batch_mean: empty batch");
  GradEstimate est;
  est.vector = contribs[0];
  for (std::size_t i = 1; i < contribs.size(); ++i) {
    if (contribs[i].size() != est.vector.size()) {
      throw ConfigError("batch_mean: contributions differ in dimension");
    }
    est.vector += contribs[i];
  }
  est.vector /= static_cast<double>(contribs.size());
  est.batch_size = contribs.size();
  est.kind = kind;
  est.off_policy = off_policy;
  return est;
}

GradEstimate estimate_on_policy(EstimatorKind kind, const Policy& policy, const ParamVector& theta,
                                std::span<const Trajectory> batch, double gamma, int threads) {
  std::vector<ParamVector> contribs(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    contribs[i] = contribution(kind, policy, theta, batch[i], gamma);
  });
  return batch_mean(contribs, kind, false);
}

GradEstimate estimate_off_policy(EstimatorKind kind, const Policy& policy,
                                 const ParamVector& theta_target,
                                 const ParamVector& theta_behavior,
                                 std::span<const Trajectory> batch, double gamma, WeightClip clip,
                                 int threads) {
  std::vector<ParamVector> contribs(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    contribs[i] =
        offpolicy_contribution(kind, policy, theta_target, theta_behavior, batch[i], gamma, clip);
  });
  return batch_mean(contribs, kind, true);
}

std::string WeightReport::csv_header() { return "batch,count,mean,variance,max"; }

std::string WeightReport::csv_row(std::size_t batch_index) const {
  std::ostringstream out;
  out.precision(17);
  out << batch_index << ',' << full.size() << ',' << mean << ',' << variance << ',' << max_weight;
  return out.str();
}

WeightReport weight_report(const Policy& policy, const ParamVector& theta_target,
                           const ParamVector& theta_behavior, std::span<const Trajectory> batch) {
  WeightReport report;
  for (const Trajectory& traj : batch) {
    check_pair(policy, theta_target, theta_behavior, traj);
    const auto lr = log_ratios(policy, theta_target, theta_behavior, traj, traj.length());
    std::vector<double> prefix;
    prefix.reserve(lr.size());
    double log_w = 0.0;
    for (double v : lr) {
      log_w += v;
      prefix.push_back(std::exp(log_w));
    }
    report.full.push_back(std::exp(log_w));
    report.truncated.push_back(std::move(prefix));
  }
  if (!report.full.empty()) {
    double sum = 0.0;
    for (double w : report.full) sum += w;
    report.mean = sum / static_cast<double>(report.full.size());
    double sq = 0.0;
    for (double w : report.full) sq += (w - report.mean) * (w - report.mean);
    report.variance = sq / static_cast<double>(report.full.size());
    report.max_weight = *std::max_element(report.full.begin(), report.full.end());
  }
  return report;
}

double max_score_norm(const Policy& policy, const ParamVector& theta,
                      std::span<const Trajectory> batch) {
  policy.check_params(theta);
  double best = 0.0;
  ParamVector g(static_cast<Eigen::Index>(policy.param_dim()));
  for (const Trajectory& traj : batch) {
    check_trajectory(policy, traj);
    for (std::size_t h = 0; h < traj.length(); ++h) {
      g.setZero();
      policy.accumulate_score(theta, traj.state(h), traj.actions[h], 1.0, g);
      best = std::max(best, g.norm());
    }
  }
  return best;
}

}  // namespace vrpg
