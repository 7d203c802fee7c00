#pragma once

#include "vrpg/common.hpp"
#include "vrpg/rng.hpp"

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vrpg {

/// Differentiable stochastic policy over a discrete action set. A policy is
/// an immutable description; parameters are always passed in. Every call
/// checks that theta has param_dim() entries.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t param_dim() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual int action_count() const = 0;

  /// Unnormalised action scores for `state`.
  virtual void logits(const ParamVector& theta, std::span<const double> state,
                      std::span<double> out) const = 0;

  /// accum += scale * grad_theta log pi_theta(action | state).
  virtual void accumulate_score(const ParamVector& theta, std::span<const double> state,
                                int action, double scale, ParamVector& accum) const = 0;

  /// Seeded initial parameters.
  virtual ParamVector initial_params(Rng& rng) const = 0;

  virtual std::unique_ptr<Policy> clone() const = 0;

  /// Softmax of the logits (max-subtracted).
  void action_distribution(const ParamVector& theta, std::span<const double> state,
                           std::span<double> out) const;
  std::vector<double> action_distribution(const ParamVector& theta,
                                          std::span<const double> state) const;

  /// log pi_theta(action | state), via log-sum-exp.
  double log_prob(const ParamVector& theta, std::span<const double> state, int action) const;

  /// Dense score vector grad_theta log pi_theta(action | state).
  ParamVector grad_log_prob(const ParamVector& theta, std::span<const double> state,
                            int action) const;

  /// Throws ConfigError on dimension mismatch and NumericError on non-finite entries.
  void check_params(const ParamVector& theta) const;
  void check_action(int action) const;
};

/// One logit per (state, action); the state is read as an integer index from
/// state[0]. theta is laid out state-major: theta[s * n_a + a].
class TabularSoftmaxPolicy final : public Policy {
 public:
  TabularSoftmaxPolicy(int state_count, int action_count);

  std::string kind() const override { return "tabular-softmax"; }
  std::size_t param_dim() const override;
  std::size_t state_dim() const override { return 1; }
  int action_count() const override { return action_count_; }
  int state_count() const { return state_count_; }

  void logits(const ParamVector& theta, std::span<const double> state,
              std::span<double> out) const override;
  void accumulate_score(const ParamVector& theta, std::span<const double> state, int action,
                        double scale, ParamVector& accum) const override;
  /// All-zero logits (uniform policy).
  ParamVector initial_params(Rng& rng) const override;
  std::unique_ptr<Policy> clone() const override;

 private:
  int state_index(std::span<const double> state) const;

  int state_count_;
  int action_count_;
};

/// Softmax over the output of a Tanh MLP:
///   affine -> tanh -> ... -> affine -> tanh -> affine -> log-softmax.
///
/// Parameters are packed layer by layer; each layer stores its weight matrix
/// (out x in, column-major) followed by its bias vector.
class MlpSoftmaxPolicy final : public Policy {
 public:
  /// `widths` = {state_dim, hidden..., action_count}; at least two entries.
  explicit MlpSoftmaxPolicy(std::vector<int> widths);

  std::string kind() const override { return "mlp-softmax"; }
  std::size_t param_dim() const override { return param_dim_; }
  std::size_t state_dim() const override { return static_cast<std::size_t>(widths_.front()); }
  int action_count() const override { return widths_.back(); }
  const std::vector<int>& widths() const { return widths_; }

  void logits(const ParamVector& theta, std::span<const double> state,
              std::span<double> out) const override;
  void accumulate_score(const ParamVector& theta, std::span<const double> state, int action,
                        double scale, ParamVector& accum) const override;
  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  ParamVector initial_params(Rng& rng) const override;
  std::unique_ptr<Policy> clone() const override;

 private:
  std::vector<int> widths_;
  std::vector<std::size_t> offsets_;  // start of each layer's weights
  std::size_t param_dim_ = 0;
};

/// Policy with the two-hidden-layer width-32 architecture used for the
/// classic-control benchmarks.
std::unique_ptr<MlpSoftmaxPolicy> make_benchmark_mlp(int state_dim, int action_count);

/// theta snapshots: 8-byte magic "VRPGTHT1", little-endian uint64 d, then d
/// little-endian IEEE-754 doubles.
void save_params(const std::filesystem::path& path, const ParamVector& theta);
ParamVector load_params(const std::filesystem::path& path);

}  // namespace vrpg
