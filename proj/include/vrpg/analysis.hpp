#pragma once

#include "vrpg/common.hpp"
#include "vrpg/envs.hpp"
#include "vrpg/estimators.hpp"
#include "vrpg/policy.hpp"

#include <cstddef>
#include <functional>
#include <optional>

namespace vrpg {

inline constexpr std::size_t kDefaultEnumerationCap = 10'000'000;

/// Upper bound on the number of trajectories of a tabular MDP: (n_s n_a)^H,
/// saturated at SIZE_MAX.
std::size_t enumeration_bound(const TabularMdpSpec& spec);

/// Visits every trajectory with positive probability under theta, depth-first
/// in lexicographic (s_0, a_0, s_1, a_1, ...) order. Transitions with zero
/// probability are pruned. Returns the number of trajectories visited.
/// Throws ArgumentError if enumeration_bound exceeds `cap` (the message names
/// the required cap).
std::size_t enumerate_trajectories(
    const TabularMdpSpec& spec, const Policy& policy, const ParamVector& theta,
    const std::function<void(const Trajectory&, double probability)>& visit,
    std::size_t cap = kDefaultEnumerationCap);

/// Exact first and second moments of one estimator.
struct EstimatorMoments {
  ParamVector mean;
  double variance_trace = 0.0;  // E||g||^2 - ||E g||^2
};

struct ExactGradientReport {
  ParamVector gradient;  // backward-recursion route
  double value = 0.0;    // backward-recursion route
  double enumerated_value = 0.0;
  std::size_t trajectory_count = 0;
  double total_probability = 0.0;
  EstimatorMoments reinforce;
  EstimatorMoments gpomdp;
  /// Present when a behavior policy was supplied: trajectories drawn under
  /// theta_behavior, estimators evaluated at theta.
  std::optional<EstimatorMoments> offpolicy_reinforce;
  std::optional<EstimatorMoments> offpolicy_gpomdp;
};

/// grad V(theta) by the finite-horizon policy-gradient theorem
/// (state-occupancy forward pass, Q backward pass), together with the exact
/// moments of the REINFORCE and GPOMDP estimators obtained by enumeration.
/// gamma may be 1 here.
ExactGradientReport exact_gradient(const TabularMdpSpec& spec, const Policy& policy,
                                   const ParamVector& theta, double gamma,
                                   const std::optional<ParamVector>& theta_behavior = std::nullopt,
                                   std::size_t cap = kDefaultEnumerationCap);

/// V(theta) = E_{s_0 ~ rho}[V(s_0)] by backward recursion.
double exact_value(const TabularMdpSpec& spec, const Policy& policy, const ParamVector& theta,
                   double gamma);

/// grad V(theta) by backward recursion only (no enumeration, no cap).
ParamVector exact_gradient_recursive(const TabularMdpSpec& spec, const Policy& policy,
                                     const ParamVector& theta, double gamma);

/// Exact trace of the covariance of one per-trajectory estimator. With a
/// behavior policy, the off-policy variant under theta_behavior is used.
double estimator_variance(const TabularMdpSpec& spec, const Policy& policy,
                          const ParamVector& theta, double gamma, EstimatorKind kind,
                          const std::optional<ParamVector>& theta_behavior = std::nullopt,
                          std::size_t cap = kDefaultEnumerationCap);

}  // namespace vrpg
