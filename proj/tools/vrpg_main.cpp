// vrpg: train, grid-search, verify and theory-constant commands.
//
// Exit status: 0 on success, 1 when a verification check or a run fails,
// 2 on usage, argument or config errors.

#include "vrpg/analysis.hpp"
#include "vrpg/envs.hpp"
#include "vrpg/harness.hpp"
#include "vrpg/theory.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Base master seed (run r uses seed + r)");
    cmd->add_option("--out-dir", out_dir,
                    std::string("Output directory (default: config, then $") + vrpg::kOutDirEnv +
                        ", then ./vrpg-out)");
    cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  }

  vrpg::Overrides overrides() const {
    vrpg::Overrides o;
    o.seed = seed;
    if (out_dir) o.out_dir = *out_dir;
    o.threads = threads;
    return o;
  }
};

int cmd_train(const std::string& path, const CommonFlags& flags) {
  const auto cfg = vrpg::make_run_config(vrpg::ConfigFile::load(path), flags.overrides());
  const auto summary = vrpg::train(cfg, &std::cout);
  std::cout << "wrote " << summary.runs.size() << " run CSVs and "
            << summary.aggregate_csv.string() << '\n';
  for (const auto& r : summary.runs) {
    if (r.diverged) return kExitFailure;
  }
  return 0;
}

int cmd_grid(const std::string& path, const CommonFlags& flags) {
  const auto config = vrpg::ConfigFile::load(path);
  const auto points = vrpg::make_grid(config, flags.overrides());
  const auto out_dir = points.front().config.out_dir;
  const auto summary = vrpg::grid(points, out_dir, &std::cout);
  std::cout << "best point " << summary.best << ':';
  for (const auto& [k, v] : points[summary.best].assignment) std::cout << ' ' << k << '=' << v;
  std::cout << "  mean final return "
            << vrpg::format_number(summary.points[summary.best].mean_final_return) << '\n'
            << "wrote " << summary.results_csv.string() << '\n';
  return 0;
}

int cmd_verify(const std::string& suite, const vrpg::SuiteOptions& options) {
  std::vector<std::string> suites;
  if (suite == "all") {
    suites = vrpg::suite_names();
  } else {
    suites = {suite};
  }
  bool ok = true;
  for (const auto& s : suites) {
    for (const auto& c : vrpg::run_suite(s, options)) {
      std::cout << vrpg::format_check(c) << '\n';
      ok = ok && c.passed;
    }
  }
  return ok ? 0 : kExitFailure;
}

struct ConstantsFlags {
  std::optional<double> G, M, R, W;
  double gamma = 0.0;
  std::optional<std::size_t> B, N;
  std::optional<double> sigma, lambda;
  std::optional<std::string> estimate_env;
  std::size_t samples = 200;
  double perturb = 1e-2;
  std::uint64_t seed = 0;
};

// Empirical stand-ins: G from the largest sampled score norm, W from the
// spread of trajectory weights between theta_0 and a perturbed theta_0.
void estimate_constants(ConstantsFlags& f) {
  auto env = vrpg::make_environment(*f.estimate_env);
  vrpg::RunConfig rc;
  rc.environment = *f.estimate_env;
  auto policy = vrpg::make_run_policy(rc, *env);
  vrpg::Rng init = vrpg::Rng::stream(f.seed, vrpg::StreamTag::kInit);
  const vrpg::ParamVector theta = policy->initial_params(init);
  const auto batch = vrpg::sample_batch(*env, *policy, theta, f.samples, {f.seed, 0});
  vrpg::Rng dir = vrpg::Rng::stream(f.seed, vrpg::StreamTag::kUser);
  vrpg::ParamVector shifted = theta;
  for (Eigen::Index k = 0; k < shifted.size(); ++k) shifted[k] += f.perturb * dir.uniform(-1.0, 1.0);
  if (!f.G) {
    f.G = vrpg::max_score_norm(*policy, theta, batch);
    std::cout << "G estimated from " << f.samples << " trajectories: " << *f.G << '\n';
  }
  if (!f.W) {
    f.W = vrpg::weight_report(*policy, shifted, theta, batch).variance;
    std::cout << "W estimated (weight variance, perturbation " << f.perturb << "): " << *f.W
              << '\n';
  }
  if (!f.R) {
    f.R = env->reward_bound();
    std::cout << "R taken from the environment reward bound: " << *f.R << '\n';
  }
}

int cmd_constants(ConstantsFlags f) {
  if (f.estimate_env) estimate_constants(f);
  if (!f.G || !f.M || !f.R || !f.W) {
    throw vrpg::ArgumentError("constants needs --G, --M, --R and --W (or --estimate-from)");
  }
  auto c = vrpg::theory_constants(*f.G, *f.M, *f.R, *f.W, f.gamma);
  c.sigma = f.sigma;
  c.lambda = f.lambda;
  std::cout << vrpg::format_constants(c);
  if (f.B || f.N) {
    if (!f.B || !f.N) throw vrpg::ArgumentError("--B and --N must be given together");
    std::cout << vrpg::format_recommendation(vrpg::recommended_hyperparams(c, *f.B, *f.N));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variance-reduced policy-gradient experiments"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  std::string train_config;
  auto* train = app.add_subcommand("train", "Run every seed of a config and write CSVs");
  train->add_option("config", train_config, "Config file")->required();
  train_flags.attach(train);

  CommonFlags grid_flags;
  std::string grid_config;
  auto* grid = app.add_subcommand("grid", "Train every point of a config with value lists");
  grid->add_option("config", grid_config, "Config file")->required();
  grid_flags.attach(grid);

  std::string suite;
  vrpg::SuiteOptions suite_options;
  std::string fixtures = vrpg::default_fixture_dir().string();
  auto* verify = app.add_subcommand("verify", "Run a verification suite on the fixture MDPs");
  std::vector<std::string> suite_choices = vrpg::suite_names();
  suite_choices.push_back("all");
  verify->add_option("suite", suite, "Suite name")->required()->check(CLI::IsMember(suite_choices));
  verify->add_option("--fixtures", fixtures, "Directory of *.mdp fixtures");
  verify->add_option("--seed", suite_options.seed, "Seed");
  verify->add_option("--threads", suite_options.threads, "Worker threads")
      ->check(CLI::PositiveNumber);
  verify->add_option("--samples", suite_options.mc_samples, "Monte Carlo trajectories")
      ->check(CLI::PositiveNumber);

  ConstantsFlags cf;
  auto* constants = app.add_subcommand("constants", "Print theory constants and (eta, p)");
  constants->add_option("--G", cf.G, "Score-norm bound");
  constants->add_option("--M", cf.M, "Hessian-norm bound");
  constants->add_option("--R", cf.R, "Reward bound");
  constants->add_option("--W", cf.W, "Importance-weight variance bound");
  constants->add_option("--gamma", cf.gamma, "Discount factor")->required();
  constants->add_option("--B", cf.B, "Small batch");
  constants->add_option("--N", cf.N, "Large batch");
  constants->add_option("--sigma", cf.sigma, "Estimator variance bound (reported only)");
  constants->add_option("--lambda", cf.lambda, "Gradient-dominance constant (reported only)");
  constants->add_option("--estimate-from", cf.estimate_env,
                        "Estimate missing G, W, R from samples of this environment");
  constants->add_option("--samples", cf.samples, "Trajectories for estimates");
  constants->add_option("--perturb", cf.perturb, "Parameter perturbation for the W estimate");
  constants->add_option("--seed", cf.seed, "Seed for estimates");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) return cmd_train(train_config, train_flags);
    if (*grid) return cmd_grid(grid_config, grid_flags);
    if (*verify) {
      suite_options.fixture_dir = fixtures;
      return cmd_verify(suite, suite_options);
    }
    if (*constants) return cmd_constants(cf);
  } catch (const vrpg::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const vrpg::ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
