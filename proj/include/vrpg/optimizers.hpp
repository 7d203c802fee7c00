#pragma once

#include "vrpg/common.hpp"
#include "vrpg/estimators.hpp"
#include "vrpg/mdp.hpp"
#include "vrpg/policy.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vrpg {

enum class Algorithm { kGpomdp, kSvrpg, kSrvrpg, kStormPg, kPagePg };

std::string to_string(Algorithm algo);
/// Accepts "gpomdp", "svrpg", "srvrpg", "storm-pg", "page-pg" (case-insensitive,
/// '_' and '-' interchangeable). Throws ArgumentError listing valid names.
Algorithm parse_algorithm(const std::string& name);
std::vector<std::string> algorithm_names();

/// What produced the estimate of a log row.
///   full     - N-batch on-policy mean (GPOMDP, STORM-PG start, PAGE-PG switch)
///   small    - B-batch recursive/momentum correction (STORM-PG, PAGE-PG)
///   inner    - B-batch inner-loop correction (SVRPG, SRVRPG)
///   snapshot - N-batch epoch anchor (SVRPG, SRVRPG)
enum class Branch { kFull, kSmall, kInner, kSnapshot };
std::string to_string(Branch branch);

/// Switching probability p_t. Constant when start == end; otherwise a linear
/// ramp from start to end over the run's progress in [0, 1].
struct SwitchSchedule {
  double start = 1.0;
  double end = 1.0;

  static SwitchSchedule constant(double p) { return {p, p}; }
  static SwitchSchedule ramp(double from, double to) { return {from, to}; }
  bool is_constant() const { return start == end; }
  double at(double progress) const;
};

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::kGpomdp;
  EstimatorKind estimator = EstimatorKind::kGpomdp;
  double eta = 0.0;              // step size
  std::size_t large_batch = 0;   // N
  std::size_t small_batch = 0;   // B
  std::size_t inner_length = 0;  // m (SVRPG, SRVRPG)
  double alpha = 0.0;            // STORM-PG momentum
  SwitchSchedule switch_prob{};  // PAGE-PG p_t
  double gamma = 0.99;
  std::size_t max_updates = 0;     // T; 0 means no limit
  std::size_t episode_budget = 0;  // 0 means no limit
  std::size_t store_every = 1;     // keep every k-th iterate for select_output
  WeightClip clip{};
  int threads = 1;
  /// Admits the boundary values alpha in {0, 1} and p = 0, which the
  /// reduction-identity checks rely on.
  bool allow_degenerate = false;

  /// Throws ArgumentError when a required field is missing or out of range.
  void validate() const;
};

/// One row per estimate computation. Rows with `updated` set follow a
/// parameter update; snapshot rows and the initial row do not.
struct IterateRow {
  std::size_t iteration = 0;  // number of parameter updates so far
  Branch branch = Branch::kFull;
  bool updated = false;
  std::size_t episodes_used = 0;
  std::size_t cum_episodes = 0;
  double v_norm = 0.0;
  double avg_return = 0.0;  // undiscounted mean episode return of the batch
};

struct OptimizerState {
  ParamVector theta;
  ParamVector v;
  std::size_t iteration = 0;  // parameter updates applied
  std::size_t inner = 0;      // inner steps taken in the current epoch
  std::size_t cum_episodes = 0;
  std::uint64_t batch_counter = 0;  // next trajectory sub-stream batch index
  ParamVector anchor_theta;         // SVRPG snapshot / previous iterate
  ParamVector anchor_v;
  bool initialized = false;
  bool diverged = false;
};

/// Draws seeded batches and keeps the episode count.
class Sampler {
 public:
  Sampler(const Environment& env, const Policy& policy, std::uint64_t master_seed,
          int threads = 1);

  std::vector<Trajectory> draw(const ParamVector& theta, std::size_t n);

  std::uint64_t batches_drawn() const { return batch_counter_; }
  std::size_t episodes() const { return episodes_; }
  void restore(std::uint64_t batch_counter, std::size_t episodes);

 private:
  const Environment& env_;
  const Policy& policy_;
  std::uint64_t master_seed_;
  int threads_;
  std::uint64_t batch_counter_ = 0;
  std::size_t episodes_ = 0;
};

/// Single-step driver for all five algorithms.
///
/// initialize() computes v_0 from N trajectories at theta_0. Each step()
/// then either
///   - applies theta <- theta + eta * v and computes the next estimate from a
///     fresh batch drawn at the new iterate, or
///   - (SVRPG/SRVRPG, at an epoch boundary) recomputes the N-batch snapshot
///     estimate without moving theta.
///
/// The off-policy corrections evaluate the previous iterate (or the
/// snapshot) on trajectories drawn at the new iterate.
class Optimizer {
 public:
  Optimizer(const Environment& env, const Policy& policy, OptimizerConfig cfg,
            std::uint64_t master_seed, ParamVector theta0);

  IterateRow initialize();
  IterateRow step();
  /// True once a limit is reached or the run diverged.
  bool done() const;

  const OptimizerState& state() const { return state_; }
  const OptimizerConfig& config() const { return cfg_; }
  /// theta_t for t = k, 2k, ... (k = store_every).
  const std::vector<ParamVector>& stored_iterates() const { return stored_; }
  /// Set when the run stopped on a non-finite estimate.
  const std::string& diagnostic() const { return diagnostic_; }
  /// p_t for the next switch decision.
  double current_switch_prob() const;

 private:
  struct BatchEstimates {
    ParamVector on_policy;
    ParamVector off_policy;  // empty unless requested
    double avg_return = 0.0;
    std::size_t size = 0;
  };
  BatchEstimates estimate(std::size_t n, const ParamVector* correction_target);
  void apply_update();
  IterateRow finish_row(Branch branch, bool updated, const BatchEstimates& b);

  const Environment& env_;
  const Policy& policy_;
  OptimizerConfig cfg_;
  std::uint64_t master_seed_;
  Sampler sampler_;
  OptimizerState state_;
  std::vector<ParamVector> stored_;
  std::string diagnostic_;
};

struct RunResult {
  OptimizerState final_state;
  std::vector<IterateRow> log;
  std::vector<ParamVector> iterates;
  bool diverged = false;
  std::string diagnostic;
};

using RowCallback = std::function<void(const IterateRow&)>;

/// Runs initialize() and step() until done(). theta_0 is drawn from the
/// policy's initializer on the kInit sub-stream unless given.
RunResult run_optimizer(const Environment& env, const Policy& policy, const OptimizerConfig& cfg,
                        std::uint64_t seed, std::optional<ParamVector> theta0 = std::nullopt,
                        const RowCallback& on_row = {});

RunResult vanilla_run(const Environment& env, const Policy& policy, OptimizerConfig cfg,
                      std::uint64_t seed, std::optional<ParamVector> theta0 = std::nullopt);
RunResult svrpg_run(const Environment& env, const Policy& policy, OptimizerConfig cfg,
                    std::uint64_t seed, std::optional<ParamVector> theta0 = std::nullopt);
RunResult srvrpg_run(const Environment& env, const Policy& policy, OptimizerConfig cfg,
                     std::uint64_t seed, std::optional<ParamVector> theta0 = std::nullopt);
RunResult storm_pg_run(const Environment& env, const Policy& policy, OptimizerConfig cfg,
                       std::uint64_t seed, std::optional<ParamVector> theta0 = std::nullopt);
RunResult page_pg_run(const Environment& env, const Policy& policy, OptimizerConfig cfg,
                      std::uint64_t seed, std::optional<ParamVector> theta0 = std::nullopt);

/// Uniform draw over the stored iterates. When iterates were thinned
/// (store_every > 1) the draw is over the stored subsequence only.
const ParamVector& select_output(std::span<const ParamVector> iterates, Rng& rng);

/// Expected trajectories consumed by T switching iterations of PAGE-PG:
/// T * (p N + (1 - p) B).
double average_samples(double p, double large_batch, double small_batch, double iterations);

}  // namespace vrpg
