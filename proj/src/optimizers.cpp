#include "vrpg/optimizers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace vrpg {

namespace {

std::string normalise_name(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (c == '_') c = '-';
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace

std::string to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::kGpomdp: return "gpomdp";
    case Algorithm::kSvrpg: return "svrpg";
    case Algorithm::kSrvrpg: return "srvrpg";
    case Algorithm::kStormPg: return "storm-pg";
    case Algorithm::kPagePg: return "page-pg";
  }
  return "?";
}

std::vector<std::string> algorithm_names() {
  return {"gpomdp", "svrpg", "srvrpg", "storm-pg", "page-pg"};
}

Algorithm parse_algorithm(const std::string& name) {
  const std::string key = normalise_name(name);
  if (key == "gpomdp" || key == "vanilla") return Algorithm::kGpomdp;
  if (key == "svrpg") return Algorithm::kSvrpg;
  if (key == "srvrpg" || key == "srvr-pg") return Algorithm::kSrvrpg;
  if (key == "storm-pg" || key == "stormpg") return Algorithm::kStormPg;
  if (key == "page-pg" || key == "pagepg") return Algorithm::kPagePg;
  std::string valid;
  for (const auto& n : algorithm_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ArgumentError("unknown algorithm '" + name + "' (valid: " + valid + ")");
}

std::string to_string(Branch branch) {
  switch (branch) {
    case Branch::kFull: return "full";
    case Branch::kSmall: return "small";
    case Branch::kInner: return "inner";
    case Branch::kSnapshot: return "snapshot";
  }
  return "?";
}

double SwitchSchedule::at(double progress) const {
  if (is_constant()) return start;
  const double t = std::clamp(progress, 0.0, 1.0);
  return start + (end - start) * t;
}

void OptimizerConfig::validate() const {
  auto fail = [this](const std::string& msg) {
    throw ArgumentError(to_string(algorithm) + ": " + msg);
  };
  if (!(eta >= 0.0) || !std::isfinite(eta)) fail("step size eta must be finite and >= 0");
  if (large_batch == 0) fail("large batch N must be at least 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (max_updates == 0 && episode_budget == 0) {
    fail("budget is zero: set max_updates or episode_budget");
  }
  if (store_every == 0) fail("store_every must be at least 1");
  if (threads < 1) fail("threads must be at least 1");
  if (!(clip.max_weight > 0.0)) fail("weight clip must be positive");

  const bool needs_small = algorithm != Algorithm::kGpomdp;
  if (needs_small) {
    if (small_batch == 0) fail("small batch B must be at least 1");
    if (small_batch > large_batch) fail("small batch B must not exceed large batch N");
  }
  if (algorithm == Algorithm::kSvrpg || algorithm == Algorithm::kSrvrpg) {
    if (inner_length == 0) fail("inner-loop length m must be at least 1");
  }
  if (algorithm == Algorithm::kStormPg) {
    const bool ok = allow_degenerate ? (alpha >= 0.0 && alpha <= 1.0) : (alpha > 0.0 && alpha < 1.0);
    if (!ok) fail("alpha must lie in (0, 1)");
  }
  if (algorithm == Algorithm::kPagePg) {
    for (double p : {switch_prob.start, switch_prob.end}) {
      const bool ok = allow_degenerate ? (p >= 0.0 && p <= 1.0) : (p > 0.0 && p <= 1.0);
      if (!ok) fail("switching probability p must lie in (0, 1]");
    }
  }
}

// ---------------------------------------------------------------------------
// Sampler

Sampler::Sampler(const Environment& env, const Policy& policy, std::uint64_t master_seed,
                 int threads)
    : env_(env), policy_(policy), master_seed_(master_seed), threads_(threads) {}

std::vector<Trajectory> Sampler::draw(const ParamVector& theta, std::size_t n) {
  auto batch = sample_batch(env_, policy_, theta, n, {master_seed_, batch_counter_}, threads_);
  ++batch_counter_;
  episodes_ += n;
  return batch;
}

void Sampler::restore(std::uint64_t batch_counter, std::size_t episodes) {
  batch_counter_ = batch_counter;
  episodes_ = episodes;
}

// ---------------------------------------------------------------------------
// Optimizer

Optimizer::Optimizer(const Environment& env, const Policy& policy, OptimizerConfig cfg,
                     std::uint64_t master_seed, ParamVector theta0)
    : env_(env),
      policy_(policy),
      cfg_(cfg),
      master_seed_(master_seed),
      sampler_(env, policy, master_seed, cfg.threads) {
  cfg_.validate();
  policy_.check_params(theta0);
  state_.theta = std::move(theta0);
}

Optimizer::BatchEstimates Optimizer::estimate(std::size_t n, const ParamVector* correction_target) {
  const auto batch = sampler_.draw(state_.theta, n);
  std::vector<ParamVector> on(n);
  std::vector<ParamVector> off(correction_target ? n : 0);
  parallel_for(n, cfg_.threads, [&](std::size_t i) {
    on[i] = contribution(cfg_.estimator, policy_, state_.theta, batch[i], cfg_.gamma);
    if (correction_target) {
      off[i] = offpolicy_contribution(cfg_.estimator, policy_, *correction_target, state_.theta,
                                      batch[i], cfg_.gamma, cfg_.clip);
    }
  });
  BatchEstimates out;
  out.size = n;
  out.on_policy = batch_mean(on, cfg_.estimator, false).vector;
  if (correction_target) out.off_policy = batch_mean(off, cfg_.estimator, true).vector;
  double total = 0.0;
  for (const auto& traj : batch) total += traj.total_reward();
  out.avg_return = total / static_cast<double>(n);
  state_.cum_episodes = sampler_.episodes();
  state_.batch_counter = sampler_.batches_drawn();
  return out;
}

void Optimizer::apply_update() {
  state_.theta += cfg_.eta * state_.v;
  ++state_.iteration;
  if (state_.iteration % cfg_.store_every == 0) stored_.push_back(state_.theta);
}

IterateRow Optimizer::finish_row(Branch branch, bool updated, const BatchEstimates& b) {
  IterateRow row;
  row.iteration = state_.iteration;
  row.branch = branch;
  row.updated = updated;
  row.episodes_used = b.size;
  row.cum_episodes = state_.cum_episodes;
  row.v_norm = state_.v.norm();
  row.avg_return = b.avg_return;
  if (!state_.v.allFinite()) {
    state_.diverged = true;
    std::ostringstream msg;
    msg << to_string(cfg_.algorithm) << ": non-finite gradient estimate at iteration "
        << state_.iteration << " (branch " << to_string(branch) << ")";
    diagnostic_ = msg.str();
  }
  return row;
}

double Optimizer::current_switch_prob() const {
  double progress = 0.0;
  if (cfg_.max_updates > 0) {
    progress = static_cast<double>(state_.iteration) / static_cast<double>(cfg_.max_updates);
  } else if (cfg_.episode_budget > 0) {
    progress = static_cast<double>(state_.cum_episodes) / static_cast<double>(cfg_.episode_budget);
  }
  return cfg_.switch_prob.at(progress);
}

IterateRow Optimizer::initialize() {
  if (state_.initialized) throw ArgumentError("optimizer already initialized");
  const BatchEstimates b = estimate(cfg_.large_batch, nullptr);
  state_.v = b.on_policy;
  state_.anchor_theta = state_.theta;
  state_.anchor_v = state_.v;
  state_.inner = 0;
  state_.initialized = true;
  const bool loopy = cfg_.algorithm == Algorithm::kSvrpg || cfg_.algorithm == Algorithm::kSrvrpg;
  return finish_row(loopy ? Branch::kSnapshot : Branch::kFull, false, b);
}

IterateRow Optimizer::step() {
  if (!state_.initialized) return initialize();
  if (state_.diverged) throw NumericError("optimizer diverged: " + diagnostic_);

  switch (cfg_.algorithm) {
    case Algorithm::kGpomdp: {
      apply_update();
      const BatchEstimates b = estimate(cfg_.large_batch, nullptr);
      state_.v = b.on_policy;
      return finish_row(Branch::kFull, true, b);
    }

    case Algorithm::kSvrpg:
    case Algorithm::kSrvrpg: {
      if (state_.inner == cfg_.inner_length) {
        // Epoch boundary: new snapshot at theta_m, no parameter move.
        const BatchEstimates b = estimate(cfg_.large_batch, nullptr);
        state_.v = b.on_policy;
        state_.anchor_theta = state_.theta;
        state_.anchor_v = state_.v;
        state_.inner = 0;
        return finish_row(Branch::kSnapshot, false, b);
      }
      const bool recursive = cfg_.algorithm == Algorithm::kSrvrpg;
      const ParamVector previous = state_.theta;
      apply_update();
      ++state_.inner;
      // SVRPG corrects against the snapshot, SRVRPG against the previous iterate.
      const ParamVector& target = recursive ? previous : state_.anchor_theta;
      const ParamVector& anchor_v = recursive ? state_.v : state_.anchor_v;
      const BatchEstimates b = estimate(cfg_.small_batch, &target);
      ParamVector next = b.on_policy + (anchor_v - b.off_policy);
      state_.v = std::move(next);
      return finish_row(Branch::kInner, true, b);
    }

    case Algorithm::kStormPg: {
      const ParamVector previous = state_.theta;
      apply_update();
      const BatchEstimates b = estimate(cfg_.small_batch, &previous);
      ParamVector next = b.on_policy + (1.0 - cfg_.alpha) * (state_.v - b.off_policy);
      state_.v = std::move(next);
      return finish_row(Branch::kSmall, true, b);
    }

    case Algorithm::kPagePg: {
      const double p = current_switch_prob();
      Rng branch_rng = Rng::stream(master_seed_, StreamTag::kBranch, state_.iteration);
      const bool full = branch_rng.uniform() < p;
      const ParamVector previous = state_.theta;
      apply_update();
      if (full) {
        const BatchEstimates b = estimate(cfg_.large_batch, nullptr);
        state_.v = b.on_policy;
        return finish_row(Branch::kFull, true, b);
      }
      const BatchEstimates b = estimate(cfg_.small_batch, &previous);
      ParamVector next = b.on_policy + (state_.v - b.off_policy);
      state_.v = std::move(next);
      return finish_row(Branch::kSmall, true, b);
    }
  }
  throw ArgumentError("unknown algorithm");
}

bool Optimizer::done() const {
  if (state_.diverged) return true;
  if (cfg_.max_updates > 0 && state_.iteration >= cfg_.max_updates) return true;
  if (cfg_.episode_budget > 0 && state_.cum_episodes >= cfg_.episode_budget) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Runs

RunResult run_optimizer(const Environment& env, const Policy& policy, const OptimizerConfig& cfg,
                        std::uint64_t seed, std::optional<ParamVector> theta0,
                        const RowCallback& on_row) {
  cfg.validate();
  if (!theta0) {
    Rng init = Rng::stream(seed, StreamTag::kInit);
    theta0 = policy.initial_params(init);
  }
  Optimizer opt(env, policy, cfg, seed, std::move(*theta0));
  RunResult result;
  auto record = [&](const IterateRow& row) {
    result.log.push_back(row);
    if (on_row) on_row(row);
  };
  record(opt.initialize());
  while (!opt.done()) record(opt.step());
  result.final_state = opt.state();
  result.iterates = opt.stored_iterates();
  result.diverged = opt.state().diverged;
  result.diagnostic = opt.diagnostic();
  return result;
}

namespace {

RunResult run_as(Algorithm algo, const Environment& env, const Policy& policy,
                 OptimizerConfig cfg, std::uint64_t seed, std::optional<ParamVector> theta0) {
  cfg.algorithm = algo;
  return run_optimizer(env, policy, cfg, seed, std::move(theta0));
}

}  // namespace

RunResult vanilla_run(const Environment& env, const Policy& policy, OptimizerConfig cfg,
                      std::uint64_t seed, std::optional<ParamVector> theta0) {
  return run_as(Algorithm::kGpomdp, env, policy, cfg, seed, std::move(theta0));
}
RunResult svrpg_run(const Environment& env, const Policy& policy, OptimizerConfig cfg,
                    std::uint64_t seed, std::optional<ParamVector> theta0) {
  return run_as(Algorithm::kSvrpg, env, policy, cfg, seed, std::move(theta0));
}
RunResult srvrpg_run(const Environment& env, const Policy& policy, OptimizerConfig cfg,
                     std::uint64_t seed, std::optional<ParamVector> theta0) {
  return run_as(Algorithm::kSrvrpg, env, policy, cfg, seed, std::move(theta0));
}
RunResult storm_pg_run(const Environment& env, const Policy& policy, OptimizerConfig cfg,
                       std::uint64_t seed, std::optional<ParamVector> theta0) {
  return run_as(Algorithm::kStormPg, env, policy, cfg, seed, std::move(theta0));
}
RunResult page_pg_run(const Environment& env, const Policy& policy, OptimizerConfig cfg,
                      std::uint64_t seed, std::optional<ParamVector> theta0) {
  return run_as(Algorithm::kPagePg, env, policy, cfg, seed, std::move(theta0));
}

const ParamVector& select_output(std::span<const ParamVector> iterates, Rng& rng) {
  if (iterates.empty()) throw ArgumentError("select_output: no stored iterates");
  return iterates[rng.below(iterates.size())];
}

double average_samples(double p, double large_batch, double small_batch, double iterations) {
  return iterations * (p * large_batch + (1.0 - p) * small_batch);
}

}  // namespace vrpg
