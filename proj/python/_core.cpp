#include "vrpg/analysis.hpp"
#include "vrpg/envs.hpp"
#include "vrpg/harness.hpp"
#include "vrpg/optimizers.hpp"
#include "vrpg/policy.hpp"
#include "vrpg/theory.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

py::dict constants_dict(const vrpg::TheoryConstants& c) {
  return py::dict("G"_a = c.G, "M"_a = c.M, "R"_a = c.R, "W"_a = c.W, "gamma"_a = c.gamma,
                  "L"_a = c.L, "C_g"_a = c.C_g, "C_omega"_a = c.C_omega, "C"_a = c.C);
}

py::dict moments_dict(const vrpg::EstimatorMoments& m) {
  return py::dict("mean"_a = m.mean, "variance_trace"_a = m.variance_trace);
}

struct TabularProblem {
  vrpg::TabularMdpSpec spec;
  vrpg::TabularSoftmaxPolicy policy;

  explicit TabularProblem(const std::filesystem::path& path)
      : spec(vrpg::load_tabular_mdp(path)), policy(spec.state_count, spec.action_count) {}
};

py::dict exact_gradient(const std::filesystem::path& mdp, const vrpg::ParamVector& theta,
                        double gamma, std::optional<vrpg::ParamVector> behavior) {
  const TabularProblem p(mdp);
  const auto rep = vrpg::exact_gradient(p.spec, p.policy, theta, gamma, behavior);
  py::dict out("gradient"_a = rep.gradient, "value"_a = rep.value,
               "trajectory_count"_a = rep.trajectory_count, "reinforce"_a = moments_dict(rep.reinforce),
               "gpomdp"_a = moments_dict(rep.gpomdp));
  if (rep.offpolicy_reinforce) {
    out["offpolicy_reinforce"] = moments_dict(*rep.offpolicy_reinforce);
    out["offpolicy_gpomdp"] = moments_dict(*rep.offpolicy_gpomdp);
  }
  return out;
}

py::dict run(const std::string& environment, const std::string& algorithm, std::uint64_t seed,
             double eta, std::size_t large_batch, std::size_t small_batch,
             std::size_t inner_length, double alpha, double p, std::optional<double> p_end,
             double gamma, std::size_t max_updates, std::size_t episode_budget,
             std::vector<int> hidden, int threads) {
  vrpg::RunConfig rc;
  rc.environment = environment;
  rc.hidden = std::move(hidden);
  vrpg::OptimizerConfig& cfg = rc.optimizer;
  cfg.algorithm = vrpg::parse_algorithm(algorithm);
  cfg.eta = eta;
  cfg.large_batch = large_batch;
  cfg.small_batch = small_batch;
  cfg.inner_length = inner_length;
  cfg.alpha = alpha;
  cfg.switch_prob = vrpg::SwitchSchedule::constant(p);
  if (p_end) cfg.switch_prob.end = *p_end;
  cfg.gamma = gamma;
  cfg.max_updates = max_updates;
  cfg.episode_budget = episode_budget;
  cfg.threads = threads;
  const auto env = vrpg::make_run_environment(rc);
  const auto policy = vrpg::make_run_policy(rc, *env);

  vrpg::RunResult result;
  {
    py::gil_scoped_release release;
    result = vrpg::run_optimizer(*env, *policy, cfg, seed);
  }
  std::vector<std::size_t> iteration, episodes;
  std::vector<double> ret, v_norm;
  std::vector<std::string> branch;
  for (const auto& row : result.log) {
    iteration.push_back(row.iteration);
    episodes.push_back(row.cum_episodes);
    ret.push_back(row.avg_return);
    v_norm.push_back(row.v_norm);
    branch.push_back(vrpg::to_string(row.branch));
  }
  return py::dict("iteration"_a = iteration, "cum_episodes"_a = episodes, "avg_return"_a = ret,
                  "v_norm"_a = v_norm, "branch"_a = branch, "theta"_a = result.final_state.theta,
                  "diverged"_a = result.diverged, "diagnostic"_a = result.diagnostic);
}

py::dict train(const std::filesystem::path& config, std::optional<std::uint64_t> seed,
               std::optional<std::filesystem::path> out_dir, std::optional<int> threads) {
  vrpg::Overrides o;
  o.seed = seed;
  o.out_dir = std::move(out_dir);
  o.threads = threads;
  const auto cfg = vrpg::make_run_config(vrpg::ConfigFile::load(config), o);
  vrpg::TrainSummary s;
  {
    py::gil_scoped_release release;
    s = vrpg::train(cfg);
  }
  py::list runs;
  for (const auto& r : s.runs) {
    runs.append(py::dict("csv"_a = r.csv, "updates"_a = r.updates, "cum_episodes"_a = r.cum_episodes,
                         "final_return"_a = r.final_return, "diverged"_a = r.diverged,
                         "final_theta"_a = r.final_theta));
  }
  return py::dict("runs"_a = runs, "aggregate_csv"_a = s.aggregate_csv,
                  "mean_final_return"_a = s.mean_final_return,
                  "mean_final_episodes"_a = s.mean_final_episodes);
}

py::list verify(const std::string& suite, std::optional<std::filesystem::path> fixture_dir,
                std::uint64_t seed, std::size_t samples) {
  vrpg::SuiteOptions o;
  o.fixture_dir = fixture_dir ? *fixture_dir : vrpg::default_fixture_dir();
  o.seed = seed;
  o.mc_samples = samples;
  std::vector<vrpg::CheckResult> checks;
  {
    py::gil_scoped_release release;
    checks = vrpg::run_suite(suite, o);
  }
  py::list out;
  for (const auto& c : checks) {
    out.append(py::dict("suite"_a = c.suite, "name"_a = c.name, "passed"_a = c.passed,
                        "value"_a = c.value, "threshold"_a = c.threshold, "detail"_a = c.detail));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Variance-reduced policy-gradient methods";

  py::register_exception<vrpg::ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<vrpg::ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<vrpg::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<vrpg::ConfigError>(m, "ConfigError", PyExc_RuntimeError);
  py::register_exception<vrpg::NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("algorithms", &vrpg::algorithm_names);
  m.def("suites", &vrpg::suite_names);

  m.def(
      "theory_constants",
      [](double G, double M, double R, double W, double gamma) {
        return constants_dict(vrpg::theory_constants(G, M, R, W, gamma));
      },
      "G"_a, "M"_a, "R"_a, "W"_a, "gamma"_a);
  m.def(
      "recommended_hyperparams",
      [](double G, double M, double R, double W, double gamma, std::size_t B, std::size_t N) {
        const auto c = vrpg::theory_constants(G, M, R, W, gamma);
        const auto r = vrpg::recommended_hyperparams(c, B, N);
        return py::dict("eta"_a = r.eta, "p"_a = r.p, "satisfied"_a = r.check.satisfied,
                        "switch_bound"_a = r.check.switch_bound,
                        "smoothness_bound"_a = r.check.smoothness_bound,
                        "binding"_a = vrpg::to_string(r.check.binding));
      },
      "G"_a, "M"_a, "R"_a, "W"_a, "gamma"_a, "B"_a, "N"_a);

  m.def("exact_gradient", &exact_gradient, "mdp"_a, "theta"_a, "gamma"_a,
        "behavior"_a = py::none(),
        "Exact gradient, value and estimator moments for a tabular MDP file.");
  m.def(
      "exact_value",
      [](const std::filesystem::path& mdp, const vrpg::ParamVector& theta, double gamma) {
        const TabularProblem p(mdp);
        return vrpg::exact_value(p.spec, p.policy, theta, gamma);
      },
      "mdp"_a, "theta"_a, "gamma"_a);

  m.def("run", &run, "environment"_a, "algorithm"_a, "seed"_a = 0, "eta"_a, "large_batch"_a,
        "small_batch"_a = 0, "inner_length"_a = 0, "alpha"_a = 0.0, "p"_a = 1.0,
        "p_end"_a = py::none(), "gamma"_a = 0.99, "max_updates"_a = 0, "episode_budget"_a = 0,
        "hidden"_a = std::vector<int>{32, 32}, "threads"_a = 1,
        "Runs one optimizer and returns its per-estimate log and final parameters.");
  m.def("train", &train, "config"_a, "seed"_a = py::none(), "out_dir"_a = py::none(),
        "threads"_a = py::none(), "Same as `vrpg train`: writes CSVs and returns a summary.");
  m.def("verify", &verify, "suite"_a, "fixture_dir"_a = py::none(), "seed"_a = 12345,
        "samples"_a = 100000);
}
