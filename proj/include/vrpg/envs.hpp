#pragma once

#include "vrpg/mdp.hpp"

#include <array>
#include <filesystem>
#include <istream>
#include <memory>
#include <string>
#include <vector>

namespace vrpg {

/// Cart-pole balancing with the Barto-Sutton-Anderson dynamics, explicit
/// Euler integration.
///
/// | constant            | value  |
/// |---------------------|--------|
/// | gravity             | 9.8    |
/// | cart mass           | 1.0    |
/// | pole mass           | 0.1    |
/// | pole half-length    | 0.5    |
/// | force magnitude     | 10.0   |
/// | time step           | 0.02 s |
/// | angle limit         | 15 deg |
/// | position limit      | 2.4    |
/// | max episode length  | 200    |
/// | initial state noise | U(-0.05, 0.05) per coordinate |
///
/// The angle limit is 15 degrees (not the 12 used by some other suites).
/// Action 0 pushes left, action 1 pushes right. Every step, including the
/// terminating one, yields reward +1.
class CartPoleEnv final : public Environment {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kForceMag = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kAngleLimitDeg = 15.0;
  static constexpr double kPositionLimit = 2.4;
  static constexpr int kMaxSteps = 200;
  static constexpr double kInitNoise = 0.05;

  using State = std::array<double, 4>;  // x, x_dot, phi, phi_dot

  std::unique_ptr<Environment> clone() const override;
  std::string name() const override { return "cartpole"; }
  std::size_t state_dim() const override { return 4; }
  int action_count() const override { return 2; }
  int horizon() const override { return kMaxSteps; }
  double reward_bound() const override { return 1.0; }

  void reset(Rng& rng, std::span<double> obs) override;
  StepResult step(int action, Rng& rng, std::span<double> obs) override;

  /// Sets the physical state directly (tests, golden traces).
  void set_state(const State& s);
  const State& state() const { return state_; }

  /// One Euler step of the equations of motion, no bookkeeping.
  static State integrate(const State& s, int action);
  /// True iff |phi| > 15 deg or |x| > 2.4.
  static bool out_of_bounds(const State& s);

 private:
  State state_{};
  int steps_ = 0;
};

/// Two-link acrobot (Sutton's formulation, "book" dynamics), RK4 over one
/// 0.2 s step.
///
/// | constant               | value          |
/// |------------------------|----------------|
/// | link lengths           | 1.0, 1.0       |
/// | link masses            | 1.0, 1.0       |
/// | link centre of mass    | 0.5, 0.5       |
/// | link moments of inertia| 1.0, 1.0       |
/// | gravity                | 9.8            |
/// | time step              | 0.2 s          |
/// | max angular velocity   | 4 pi, 9 pi     |
/// | torques (actions 0,1,2)| -1, 0, +1      |
/// | goal                   | -cos t1 - cos(t1 + t2) > 1 |
/// | max episode length     | 500            |
/// | initial state noise    | U(-0.1, 0.1) per coordinate |
///
/// Observation: (cos t1, sin t1, cos t2, sin t2, t1_dot, t2_dot). Reward -1
/// per step that does not reach the goal, 0 on the step that does.
class AcrobotEnv final : public Environment {
 public:
  static constexpr double kLinkLength1 = 1.0;
  static constexpr double kLinkMass1 = 1.0;
  static constexpr double kLinkMass2 = 1.0;
  static constexpr double kLinkCom1 = 0.5;
  static constexpr double kLinkCom2 = 0.5;
  static constexpr double kLinkMoi = 1.0;
  static constexpr double kGravity = 9.8;
  static constexpr double kDt = 0.2;
  static constexpr double kMaxVel1 = 4.0 * 3.14159265358979323846;
  static constexpr double kMaxVel2 = 9.0 * 3.14159265358979323846;
  static constexpr std::array<double, 3> kTorques{-1.0, 0.0, 1.0};
  static constexpr int kMaxSteps = 500;
  static constexpr double kInitNoise = 0.1;

  using State = std::array<double, 4>;  // t1, t2, t1_dot, t2_dot

  std::unique_ptr<Environment> clone() const override;
  std::string name() const override { return "acrobot"; }
  std::size_t state_dim() const override { return 6; }
  int action_count() const override { return 3; }
  int horizon() const override { return kMaxSteps; }
  double reward_bound() const override { return 1.0; }

  void reset(Rng& rng, std::span<double> obs) override;
  StepResult step(int action, Rng& rng, std::span<double> obs) override;

  void set_state(const State& s);
  const State& state() const { return state_; }

  /// Time derivative of (t1, t2, t1_dot, t2_dot) under `torque`.
  static State derivatives(const State& s, double torque);
  /// RK4 over one step, then angle wrapping and velocity clipping.
  static State integrate(const State& s, double torque);
  static bool goal_reached(const State& s);
  /// Kinetic plus potential energy (zero torque conserves it).
  static double energy(const State& s);

 private:
  void observe(std::span<double> obs) const;

  State state_{};
  int steps_ = 0;
};

/// Finite MDP with explicit tables. Terminates only at the horizon.
struct TabularMdpSpec {
  int state_count = 0;
  int action_count = 0;
  int horizon = 0;
  double reward_bound = 0.0;
  std::vector<double> initial;      // rho, state_count entries
  std::vector<double> rewards;      // r[s * n_a + a]
  std::vector<double> transitions;  // P[(s * n_a + a) * n_s + s']

  double reward(int s, int a) const { return rewards[s * action_count + a]; }
  double transition(int s, int a, int next) const {
    return transitions[(static_cast<std::size_t>(s) * action_count + a) * state_count + next];
  }
  std::span<const double> next_state_probs(int s, int a) const {
    return {transitions.data() + (static_cast<std::size_t>(s) * action_count + a) * state_count,
            static_cast<std::size_t>(state_count)};
  }

  /// Throws ValidationError if any distribution is negative or does not sum
  /// to 1 within 1e-12, or if some |r| exceeds the declared bound.
  void validate() const;
};

/// Parses the plain-text MDP format:
///
///     # comment
///     states = 2
///     actions = 2
///     horizon = 3
///     reward_bound = 1        (optional, defaults to max |r|)
///     initial = 0.5 0.5
///     [rewards]               one row per state, n_a entries
///     1 0
///     0 1
///     [transitions]           one row per (s, a): "s a : p_0 ... p_{n_s-1}"
///     0 0 : 1 0
///     ...
///
/// Throws ParseError with the line number on malformed input and
/// ValidationError on inconsistent tables.
TabularMdpSpec parse_tabular_mdp(std::istream& in);
TabularMdpSpec load_tabular_mdp(const std::filesystem::path& path);
std::string format_tabular_mdp(const TabularMdpSpec& spec);

class TabularEnv final : public Environment {
 public:
  explicit TabularEnv(TabularMdpSpec spec);

  std::unique_ptr<Environment> clone() const override;
  std::string name() const override { return "tabular"; }
  std::size_t state_dim() const override { return 1; }
  int action_count() const override { return spec_.action_count; }
  int horizon() const override { return spec_.horizon; }
  double reward_bound() const override { return spec_.reward_bound; }

  void reset(Rng& rng, std::span<double> obs) override;
  StepResult step(int action, Rng& rng, std::span<double> obs) override;

  const TabularMdpSpec& spec() const { return spec_; }
  int current_state() const { return state_; }
  void set_state(int s);

 private:
  TabularMdpSpec spec_;
  int state_ = 0;
  int steps_ = 0;
};

/// One tabular transition without an environment instance.
struct TabularStep {
  int next_state;
  double reward;
  bool terminal;
};
TabularStep tabular_step(const TabularMdpSpec& spec, int state, int action, int steps_taken,
                         Rng& rng);

/// "cartpole", "acrobot", or a path to a tabular MDP file.
std::unique_ptr<Environment> make_environment(const std::string& name);

}  // namespace vrpg
