#include "vrpg/analysis.hpp"
#include "vrpg/envs.hpp"
#include "vrpg/harness.hpp"
#include "vrpg/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#ifndef VRPG_DEFAULT_FIXTURE_DIR
#define VRPG_DEFAULT_FIXTURE_DIR "data/fixtures"
#endif

namespace vrpg {

namespace fs = std::filesystem;

namespace {

CheckResult check(const std::string& suite, std::string name, bool passed, double value,
                  double threshold, std::string detail = {}) {
  return {suite, std::move(name), passed, value, threshold, std::move(detail)};
}

struct Fixture {
  std::string name;
  TabularMdpSpec spec;
  ParamVector theta;
  ParamVector behavior;
};

// Each fixture gets its own parameter draw: theta ~ U(-1, 1), behavior a
// perturbation of theta.
std::vector<Fixture> load_fixtures(const SuiteOptions& options) {
  const auto files = fixture_files(options.fixture_dir);
  if (files.empty()) {
    throw ConfigError("no *.mdp fixtures in " + options.fixture_dir.string());
  }
  std::vector<Fixture> out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    Fixture f;
    f.name = files[i].stem().string();
    f.spec = load_tabular_mdp(files[i]);
    const auto d = static_cast<Eigen::Index>(f.spec.state_count * f.spec.action_count);
    Rng rng = Rng::stream(options.seed, StreamTag::kUser, 1, i);
    f.theta.resize(d);
    f.behavior.resize(d);
    for (Eigen::Index k = 0; k < d; ++k) f.theta[k] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index k = 0; k < d; ++k) f.behavior[k] = f.theta[k] + rng.uniform(-0.3, 0.3);
    out.push_back(std::move(f));
  }
  return out;
}

constexpr double kFixtureGamma = 0.9;

// ---------------------------------------------------------------------------

std::vector<CheckResult> suite_gradients(const SuiteOptions& options) {
  const std::string suite = "gradients";
  std::vector<CheckResult> out;
  const MlpSoftmaxPolicy shapes[] = {MlpSoftmaxPolicy({4, 32, 32, 2}),
                                     MlpSoftmaxPolicy({6, 32, 32, 3})};
  Rng rng = Rng::stream(options.seed, StreamTag::kUser, 2);
  double worst_fd = 0.0;
  double worst_identity = 0.0;
  constexpr int kTriples = 20;
  constexpr double kStep = 1e-5;
  for (int t = 0; t < kTriples; ++t) {
    const MlpSoftmaxPolicy& policy = shapes[t % 2];
    ParamVector theta = policy.initial_params(rng);
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta[k] += rng.uniform(-0.5, 0.5);
    std::vector<double> s(policy.state_dim());
    for (double& x : s) x = rng.uniform(-2.0, 2.0);
    const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(policy.action_count())));

    const ParamVector g = policy.grad_log_prob(theta, s, a);
    ParamVector fd(theta.size());
    ParamVector probe = theta;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      probe[k] = theta[k] + kStep;
      const double up = policy.log_prob(probe, s, a);
      probe[k] = theta[k] - kStep;
      const double down = policy.log_prob(probe, s, a);
      probe[k] = theta[k];
      fd[k] = (up - down) / (2.0 * kStep);
    }
    const double rel = (g - fd).norm() / std::max({g.norm(), fd.norm(), 1e-12});
    worst_fd = std::max(worst_fd, rel);

    const auto pi = policy.action_distribution(theta, s);
    ParamVector identity = ParamVector::Zero(theta.size());
    for (int b = 0; b < policy.action_count(); ++b) identity += pi[b] * policy.grad_log_prob(theta, s, b);
    worst_identity = std::max(worst_identity, identity.norm());
  }
  out.push_back(check(suite, "mlp finite differences (20 triples, max relative error)",
                      worst_fd < 1e-4, worst_fd, 1e-4));
  out.push_back(check(suite, "mlp score identity sum_a pi grad log pi", worst_identity <= 1e-10,
                      worst_identity, 1e-10));

  // Tabular block: closed form e_a - pi on the visited state's logits.
  TabularSoftmaxPolicy tab(3, 3);
  ParamVector theta(9);
  for (Eigen::Index k = 0; k < 9; ++k) theta[k] = rng.uniform(-1.0, 1.0);
  double worst_tab = 0.0;
  for (int s = 0; s < 3; ++s) {
    const double obs = s;
    for (int a = 0; a < 3; ++a) {
      const ParamVector g = tab.grad_log_prob(theta, std::span<const double>(&obs, 1), a);
      const auto pi = tab.action_distribution(theta, std::span<const double>(&obs, 1));
      ParamVector want = ParamVector::Zero(9);
      for (int b = 0; b < 3; ++b) want[s * 3 + b] = (b == a ? 1.0 : 0.0) - pi[b];
      worst_tab = std::max(worst_tab, (g - want).norm());
    }
  }
  out.push_back(check(suite, "tabular score closed form", worst_tab <= 1e-14, worst_tab, 1e-14));
  return out;
}

// ---------------------------------------------------------------------------

struct McStats {
  ParamVector mean;
  ParamVector se;
};

McStats monte_carlo(const std::vector<ParamVector>& samples) {
  const auto n = static_cast<double>(samples.size());
  McStats st;
  st.mean = ParamVector::Zero(samples[0].size());
  for (const auto& g : samples) st.mean += g;
  st.mean /= n;
  ParamVector var = ParamVector::Zero(samples[0].size());
  for (const auto& g : samples) var += (g - st.mean).cwiseAbs2();
  var /= (n - 1.0);
  st.se = (var / n).cwiseSqrt();
  return st;
}

// Largest |mean - target| / SE over coordinates; coordinates with zero
// spread must match to rounding.
double worst_z(const McStats& st, const ParamVector& target) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < target.size(); ++k) {
    const double diff = std::abs(st.mean[k] - target[k]);
    if (st.se[k] == 0.0) {
      if (diff > 1e-12) return std::numeric_limits<double>::infinity();
      continue;
    }
    worst = std::max(worst, diff / st.se[k]);
  }
  return worst;
}

std::vector<CheckResult> suite_unbiasedness(const SuiteOptions& options) {
  const std::string suite = "unbiasedness";
  std::vector<CheckResult> out;
  const auto fixtures = load_fixtures(options);
  for (std::size_t fi = 0; fi < fixtures.size(); ++fi) {
    const Fixture& f = fixtures[fi];
    TabularSoftmaxPolicy policy(f.spec.state_count, f.spec.action_count);
    const auto report = exact_gradient(f.spec, policy, f.theta, kFixtureGamma, f.behavior);
    const ParamVector& grad = report.gradient;

    const double mass = std::abs(report.total_probability - 1.0);
    out.push_back(check(suite, f.name + ": enumeration probabilities sum to 1", mass <= 1e-10, mass,
                        1e-10));
    const double dv = std::abs(report.value - report.enumerated_value);
    out.push_back(check(suite, f.name + ": DP value equals enumerated value", dv <= 1e-10, dv,
                        1e-10));
    const std::pair<const char*, const EstimatorMoments*> exact[] = {
        {"reinforce", &report.reinforce},
        {"gpomdp", &report.gpomdp},
        {"off-policy reinforce", &*report.offpolicy_reinforce},
        {"off-policy gpomdp", &*report.offpolicy_gpomdp}};
    for (const auto& [label, moments] : exact) {
      const double err = (moments->mean - grad).lpNorm<Eigen::Infinity>();
      out.push_back(check(suite, f.name + ": exact E[" + std::string(label) + "] = grad V",
                          err <= 1e-8, err, 1e-8));
    }

    // Monte Carlo over sampled trajectories.
    TabularEnv env(f.spec);
    const std::uint64_t master = derive_seed(options.seed, StreamTag::kUser, 4, fi);
    const auto on = sample_batch(env, policy, f.theta, options.mc_samples, {master, 0},
                                 options.threads);
    const auto off = sample_batch(env, policy, f.behavior, options.mc_samples, {master, 1},
                                  options.threads);
    for (EstimatorKind kind : {EstimatorKind::kReinforce, EstimatorKind::kGpomdp}) {
      std::vector<ParamVector> g_on(on.size());
      std::vector<ParamVector> g_off(off.size());
      parallel_for(on.size(), options.threads, [&](std::size_t i) {
        g_on[i] = contribution(kind, policy, f.theta, on[i], kFixtureGamma);
        g_off[i] = offpolicy_contribution(kind, policy, f.theta, f.behavior, off[i], kFixtureGamma);
      });
      const double z_on = worst_z(monte_carlo(g_on), grad);
      const double z_off = worst_z(monte_carlo(g_off), grad);
      const std::string n = std::to_string(options.mc_samples);
      out.push_back(check(suite, f.name + ": MC " + to_string(kind) + " mean (" + n + " samples, max z)",
                          z_on <= 4.0, z_on, 4.0));
      out.push_back(check(suite,
                          f.name + ": MC off-policy " + to_string(kind) + " mean (" + n +
                              " samples, max z)",
                          z_off <= 4.0, z_off, 4.0));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<CheckResult> suite_variance(const SuiteOptions& options) {
  const std::string suite = "variance";
  std::vector<CheckResult> out;
  double best_gap = 0.0;
  std::string best_name;
  for (const Fixture& f : load_fixtures(options)) {
    TabularSoftmaxPolicy policy(f.spec.state_count, f.spec.action_count);
    const double rf =
        estimator_variance(f.spec, policy, f.theta, kFixtureGamma, EstimatorKind::kReinforce);
    const double gp =
        estimator_variance(f.spec, policy, f.theta, kFixtureGamma, EstimatorKind::kGpomdp);
    const double tol = 1e-12 * std::max(1.0, rf);
    std::ostringstream detail;
    detail << "reinforce " << format_number(rf) << ", gpomdp " << format_number(gp);
    out.push_back(check(suite, f.name + ": tr Cov[gpomdp] <= tr Cov[reinforce]", gp <= rf + tol,
                        gp - rf, tol, detail.str()));
    if (rf - gp > best_gap) {
      best_gap = rf - gp;
      best_name = f.name;
    }
  }
  out.push_back(check(suite, "strict reduction on at least one fixture", best_gap > 1e-9,
                      best_gap, 1e-9, best_name.empty() ? "none" : "largest gap on " + best_name));
  return out;
}

// ---------------------------------------------------------------------------

// Steps both optimizers in lock-step and counts iterations whose theta or v
// differ in any bit.
std::size_t lockstep_mismatches(const Environment& env, const Policy& policy,
                                const OptimizerConfig& a, const OptimizerConfig& b,
                                std::uint64_t seed, std::size_t steps) {
  Rng init = Rng::stream(seed, StreamTag::kInit);
  const ParamVector theta0 = policy.initial_params(init);
  Optimizer x(env, policy, a, seed, theta0);
  Optimizer y(env, policy, b, seed, theta0);
  x.initialize();
  y.initialize();
  std::size_t mismatches = 0;
  auto same = [](const ParamVector& p, const ParamVector& q) {
    return p.size() == q.size() && std::equal(p.data(), p.data() + p.size(), q.data());
  };
  for (std::size_t t = 0; t <= steps; ++t) {
    if (!same(x.state().theta, y.state().theta) || !same(x.state().v, y.state().v)) ++mismatches;
    if (t < steps) {
      x.step();
      y.step();
    }
  }
  return mismatches;
}

std::vector<CheckResult> suite_reductions(const SuiteOptions& options) {
  const std::string suite = "reductions";
  std::vector<CheckResult> out;
  constexpr std::size_t kSteps = 40;

  struct Case {
    std::string name;
    std::unique_ptr<Environment> env;
    std::unique_ptr<Policy> policy;
    double eta;
  };
  std::vector<Case> cases;
  const auto files = fixture_files(options.fixture_dir);
  if (files.empty()) throw ConfigError("no *.mdp fixtures in " + options.fixture_dir.string());
  {
    auto env = std::make_unique<TabularEnv>(load_tabular_mdp(files.back()));
    auto policy = std::make_unique<TabularSoftmaxPolicy>(env->spec().state_count,
                                                         env->spec().action_count);
    cases.push_back({files.back().stem().string(), std::move(env), std::move(policy), 0.5});
  }
  cases.push_back({"cartpole", std::make_unique<CartPoleEnv>(),
                   std::make_unique<MlpSoftmaxPolicy>(std::vector<int>{4, 8, 2}), 0.01});

  for (const Case& c : cases) {
    OptimizerConfig base;
    base.eta = c.eta;
    base.gamma = 0.99;
    base.max_updates = kSteps;
    base.allow_degenerate = true;

    OptimizerConfig storm = base, vanilla_small = base;
    storm.algorithm = Algorithm::kStormPg;
    storm.alpha = 1.0;
    storm.large_batch = storm.small_batch = 5;
    vanilla_small.algorithm = Algorithm::kGpomdp;
    vanilla_small.large_batch = 5;
    const auto m1 = lockstep_mismatches(*c.env, *c.policy, storm, vanilla_small, options.seed, kSteps);
    out.push_back(check(suite, c.name + ": STORM-PG(alpha=1) == vanilla small-batch", m1 == 0,
                        static_cast<double>(m1), 0.0, "mismatching iterates"));

    OptimizerConfig storm0 = base, srvrpg = base;
    storm0.algorithm = Algorithm::kStormPg;
    storm0.alpha = 0.0;
    storm0.large_batch = srvrpg.large_batch = 20;
    storm0.small_batch = srvrpg.small_batch = 4;
    srvrpg.algorithm = Algorithm::kSrvrpg;
    srvrpg.inner_length = kSteps + 1;
    const auto m2 = lockstep_mismatches(*c.env, *c.policy, storm0, srvrpg, options.seed, kSteps);
    out.push_back(check(suite, c.name + ": STORM-PG(alpha=0) == SRVRPG recursion", m2 == 0,
                        static_cast<double>(m2), 0.0, "mismatching iterates"));

    OptimizerConfig page = base, vanilla = base;
    page.algorithm = Algorithm::kPagePg;
    page.switch_prob = SwitchSchedule::constant(1.0);
    page.large_batch = vanilla.large_batch = 20;
    page.small_batch = 4;
    vanilla.algorithm = Algorithm::kGpomdp;
    const auto m3 = lockstep_mismatches(*c.env, *c.policy, page, vanilla, options.seed, kSteps);
    out.push_back(check(suite, c.name + ": PAGE-PG(p=1) == vanilla N-batch", m3 == 0,
                        static_cast<double>(m3), 0.0, "mismatching iterates"));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<CheckResult> suite_accounting(const SuiteOptions& options) {
  const std::string suite = "accounting";
  std::vector<CheckResult> out;
  const auto files = fixture_files(options.fixture_dir);
  if (files.empty()) throw ConfigError("no *.mdp fixtures in " + options.fixture_dir.string());
  const TabularEnv env(load_tabular_mdp(files.back()));
  const TabularSoftmaxPolicy policy(env.spec().state_count, env.spec().action_count);

  constexpr double p = 0.1;
  constexpr std::size_t N = 50, B = 5, T = 200;
  OptimizerConfig cfg;
  cfg.algorithm = Algorithm::kPagePg;
  cfg.switch_prob = SwitchSchedule::constant(p);
  cfg.large_batch = N;
  cfg.small_batch = B;
  cfg.eta = 0.1;
  cfg.gamma = 0.9;
  cfg.max_updates = T;
  cfg.store_every = T;

  const std::size_t runs = options.accounting_runs;
  std::vector<double> used(runs);
  std::vector<std::size_t> ledger_errors(runs, 0);
  parallel_for(runs, options.threads, [&](std::size_t r) {
    const RunResult res = run_optimizer(env, policy, cfg, options.seed + r);
    std::size_t sum = 0;
    for (const auto& row : res.log) sum += row.episodes_used;
    if (sum != res.final_state.cum_episodes) ledger_errors[r] = 1;
    // The initial N-batch precedes the T switching iterations.
    used[r] = static_cast<double>(res.final_state.cum_episodes - N);
  });
  double mean = 0.0;
  for (double u : used) mean += u;
  mean /= static_cast<double>(runs);
  const double expected = average_samples(p, N, B, T);
  const double per_run_var = static_cast<double>(T) * p * (1.0 - p) * double(N - B) * double(N - B);
  const double sigma = std::sqrt(per_run_var / static_cast<double>(runs));
  const double dev = std::abs(mean - expected);
  std::ostringstream detail;
  detail << "mean " << format_number(mean) << " vs T(pN+(1-p)B) = " << format_number(expected)
         << ", sigma " << format_number(sigma);
  out.push_back(check(suite, "PAGE-PG mean episodes over " + std::to_string(runs) + " runs",
                      dev <= 4.0 * sigma, dev, 4.0 * sigma, detail.str()));
  std::size_t bad = 0;
  for (auto e : ledger_errors) bad += e;
  out.push_back(check(suite, "cumulative episodes equal the sum of batch sizes", bad == 0,
                      static_cast<double>(bad), 0.0, "runs with a mismatch"));
  return out;
}

// ---------------------------------------------------------------------------

std::vector<CheckResult> suite_theory(const SuiteOptions& options) {
  const std::string suite = "theory";
  std::vector<CheckResult> out;
  const TheoryConstants c = theory_constants(1, 1, 1, 0, 0.5);
  const bool spot = c.L == 20.0 && c.C_g == 4.0 && c.C_omega == 1152.0 && c.C == 3104.0;
  std::ostringstream detail;
  detail << "L " << format_number(c.L) << ", C_g " << format_number(c.C_g) << ", C_omega "
         << format_number(c.C_omega) << ", C " << format_number(c.C);
  out.push_back(check(suite, "spot value G=M=R=1, W=0, gamma=0.5", spot, c.C, 3104.0, detail.str()));

  Rng rng = Rng::stream(options.seed, StreamTag::kUser, 3);
  std::size_t failures = 0;
  double worst_ratio = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double G = rng.uniform(0.01, 5.0);
    const double M = rng.uniform(0.0, 5.0);
    const double R = rng.uniform(0.01, 5.0);
    const double W = rng.uniform(0.0, 3.0);
    const double gamma = rng.uniform(0.05, 0.99);
    const std::size_t N = 1 + rng.below(1000);
    const std::size_t B = 1 + rng.below(N);
    const auto rec = recommended_hyperparams(theory_constants(G, M, R, W, gamma), B, N);
    const double bound = std::min(rec.check.switch_bound, rec.check.smoothness_bound);
    if (!(rec.check.eta_squared <= bound)) ++failures;
    worst_ratio = std::max(worst_ratio, rec.check.eta_squared / bound);
  }
  out.push_back(check(suite, "recommended (eta, p) satisfies the step-size condition (100 draws)",
                      failures == 0, worst_ratio, 1.0, "max eta^2 / bound"));
  return out;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"gradients", "unbiasedness", "variance",
                                                 "reductions", "accounting",  "theory"};
  return names;
}

std::vector<CheckResult> run_suite(const std::string& suite, const SuiteOptions& options) {
  if (suite == "gradients") return suite_gradients(options);
  if (suite == "unbiasedness") return suite_unbiasedness(options);
  if (suite == "variance") return suite_variance(options);
  if (suite == "reductions") return suite_reductions(options);
  if (suite == "accounting") return suite_accounting(options);
  if (suite == "theory") return suite_theory(options);
  std::string valid;
  for (const auto& n : suite_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ArgumentError("unknown suite '" + suite + "' (valid: " + valid + ")");
}

std::vector<fs::path> fixture_files(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".mdp") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path default_fixture_dir() {
  if (const char* env = std::getenv("VRPG_FIXTURE_DIR"); env && *env) return env;
  return VRPG_DEFAULT_FIXTURE_DIR;
}

std::string format_check(const CheckResult& c) {
  std::ostringstream out;
  out << (c.passed ? "PASS" : "FAIL") << "  [" << c.suite << "] " << c.name << "  value "
      << format_number(c.value) << " (bound " << format_number(c.threshold) << ")";
  if (!c.detail.empty()) out << "  " << c.detail;
  return out.str();
}

}  // namespace vrpg
