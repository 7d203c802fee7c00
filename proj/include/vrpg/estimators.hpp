#pragma once

#include "vrpg/common.hpp"
#include "vrpg/mdp.hpp"
#include "vrpg/policy.hpp"

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vrpg {

enum class EstimatorKind { kReinforce, kGpomdp };

std::string to_string(EstimatorKind kind);
EstimatorKind parse_estimator_kind(const std::string& name);

/// Per-trajectory REINFORCE term: (sum_h score_h) * R(tau).
ParamVector reinforce_contrib(const Policy& policy, const ParamVector& theta,
                              const Trajectory& traj, double gamma);

/// Per-trajectory GPOMDP term: sum_h gamma^h r_h Z_h, with Z_h the running
/// sum of scores up to step h. Single forward pass.
ParamVector gpomdp_contrib(const Policy& policy, const ParamVector& theta, const Trajectory& traj,
                           double gamma);

ParamVector contribution(EstimatorKind kind, const Policy& policy, const ParamVector& theta,
                         const Trajectory& traj, double gamma);

/// Clip applied to importance weights. Off (infinite) unless set.
struct WeightClip {
  double max_weight = std::numeric_limits<double>::infinity();
  bool enabled() const { return max_weight < std::numeric_limits<double>::infinity(); }
};

/// omega(tau | behavior, target) = prod_j pi_target(a_j|s_j) / pi_behavior(a_j|s_j),
/// accumulated in log space. Throws NumericError naming the step index if a
/// log-ratio is not finite.
double weight_full(const Policy& policy, const ParamVector& theta_target,
                   const ParamVector& theta_behavior, const Trajectory& traj);

/// omega_{0:h}: the product restricted to steps 0..h. Requires h < length.
double weight_truncated(const Policy& policy, const ParamVector& theta_target,
                        const ParamVector& theta_behavior, const Trajectory& traj, std::size_t h);

/// omega(tau) * REINFORCE term evaluated at theta_target.
ParamVector offpolicy_reinforce_contrib(const Policy& policy, const ParamVector& theta_target,
                                        const ParamVector& theta_behavior,
                                        const Trajectory& traj, double gamma,
                                        WeightClip clip = {});

/// sum_h omega_{0:h} gamma^h r_h Z_{target,h}; running log-weight and running
/// score prefix are maintained in the same pass.
ParamVector offpolicy_gpomdp_contrib(const Policy& policy, const ParamVector& theta_target,
                                     const ParamVector& theta_behavior, const Trajectory& traj,
                                     double gamma, WeightClip clip = {});

ParamVector offpolicy_contribution(EstimatorKind kind, const Policy& policy,
                                   const ParamVector& theta_target,
                                   const ParamVector& theta_behavior, const Trajectory& traj,
                                   double gamma, WeightClip clip = {});

struct GradEstimate {
  ParamVector vector;
  std::size_t batch_size = 0;
  EstimatorKind kind = EstimatorKind::kGpomdp;
  bool off_policy = false;
};

/// Mean of the contributions, summed in index order.
GradEstimate batch_mean(std::span<const ParamVector> contribs,
                        EstimatorKind kind = EstimatorKind::kGpomdp, bool off_policy = false);

/// On-policy batch estimate at theta: contributions are computed in parallel
/// and reduced in index order.
GradEstimate estimate_on_policy(EstimatorKind kind, const Policy& policy, const ParamVector& theta,
                                std::span<const Trajectory> batch, double gamma, int threads = 1);

/// Importance-weighted batch estimate at theta_target from trajectories drawn
/// under theta_behavior.
GradEstimate estimate_off_policy(EstimatorKind kind, const Policy& policy,
                                 const ParamVector& theta_target,
                                 const ParamVector& theta_behavior,
                                 std::span<const Trajectory> batch, double gamma,
                                 WeightClip clip = {}, int threads = 1);

/// Importance-weight diagnostics over a batch.
struct WeightReport {
  std::vector<double> full;                    // omega per trajectory
  std::vector<std::vector<double>> truncated;  // omega_{0:h} per trajectory
  double max_weight = 0.0;
  double mean = 0.0;
  double variance = 0.0;  // empirical (population) variance of `full`

  /// CSV row: "batch,count,mean,variance,max".
  std::string csv_row(std::size_t batch_index) const;
  static std::string csv_header();
};

WeightReport weight_report(const Policy& policy, const ParamVector& theta_target,
                           const ParamVector& theta_behavior, std::span<const Trajectory> batch);

/// max over steps of ||grad log pi|| for a batch: empirical stand-in for the
/// bounded-score constant G.
double max_score_norm(const Policy& policy, const ParamVector& theta,
                      std::span<const Trajectory> batch);

}  // namespace vrpg
