#pragma once

#include "vrpg/common.hpp"
#include "vrpg/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vrpg {

class Policy;

struct StepResult {
  double reward = 0.0;
  bool terminal = false;
};

/// Episodic MDP. Instances are stateful (they own the current physical
/// state) and cheap to clone; use one instance per concurrent rollout.
///
/// Observations are written into caller-provided buffers of size state_dim().
/// Finite MDPs expose the state index as a single-element observation.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::unique_ptr<Environment> clone() const = 0;
  virtual std::string name() const = 0;

  virtual std::size_t state_dim() const = 0;
  virtual int action_count() const = 0;
  /// Maximum number of steps per episode (H).
  virtual int horizon() const = 0;
  /// Declared bound R with |r| <= R for every step.
  virtual double reward_bound() const = 0;

  /// Draws s_0 ~ rho and writes the observation.
  virtual void reset(Rng& rng, std::span<double> obs) = 0;
  /// Applies `action` in the current state. Must not be called again after a
  /// terminal step until the next reset().
  virtual StepResult step(int action, Rng& rng, std::span<double> obs) = 0;
};

/// One episode. Row h of `states` is the observation s_h at which a_h was
/// taken and r_h received. Episodes that end early are not padded.
struct Trajectory {
  std::size_t state_dim = 0;
  std::vector<double> states;  // length() * state_dim, row-major
  std::vector<int> actions;
  std::vector<double> rewards;
  bool terminal = false;  // true if the environment signalled termination

  std::size_t length() const noexcept { return actions.size(); }
  std::span<const double> state(std::size_t h) const {
    return {states.data() + h * state_dim, state_dim};
  }
  /// Undiscounted sum of rewards.
  double total_reward() const noexcept;

  bool operator==(const Trajectory&) const = default;
};

/// Discount factor gamma in (0, 1).
class DiscountSpec {
 public:
  explicit DiscountSpec(double gamma);
  double gamma() const noexcept { return gamma_; }

 private:
  double gamma_;
};

/// R(tau) = sum_h gamma^h r_h over the realised steps.
double discounted_return(const Trajectory& traj, double gamma);
inline double discounted_return(const Trajectory& traj, const DiscountSpec& disc) {
  return discounted_return(traj, disc.gamma());
}

/// Inverse-CDF draw from a probability vector in index order: returns the
/// first index whose cumulative sum exceeds u (u in [0,1)). Falls back to the
/// last index with positive mass when rounding leaves the total below u.
int sample_index(std::span<const double> probs, double u);

/// Samples one trajectory: s_0 ~ rho, a_h ~ pi_theta(.|s_h), stopping at the
/// horizon or at the first terminal step. `env` is reset first.
Trajectory rollout(Environment& env, const Policy& policy, const ParamVector& theta, Rng& rng);

/// Identifies the trajectory sub-streams of one batch.
struct BatchKey {
  std::uint64_t master_seed = 0;
  std::uint64_t batch_counter = 0;
};

/// n independent trajectories. Trajectory i uses the sub-stream
/// (master_seed, kTrajectory, batch_counter, i), so the result does not
/// depend on `threads`.
std::vector<Trajectory> sample_batch(const Environment& env, const Policy& policy,
                                     const ParamVector& theta, std::size_t n, BatchKey key,
                                     int threads = 1);

/// Runs fn(i) for i in [0, n) over `threads` workers with a static partition.
/// fn must only write to per-index state.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn);

}  // namespace vrpg

#include "vrpg/detail/parallel.hpp"
