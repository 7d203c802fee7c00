#include "support.hpp"
#include "vrpg/harness.hpp"
#include "vrpg/policy.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace vrpg {
namespace {

namespace fs = std::filesystem;

ConfigFile parse(const std::string& text) {
  std::istringstream in(text);
  return ConfigFile::parse(in);
}

int parse_error_line(const std::string& text) {
  try {
    make_run_config(parse(text));
  } catch (const ParseError& e) {
    return e.line();
  }
  return -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// A short tabular run on the chain fixture.
std::string chain_config(const std::string& extra = "") {
  return "[experiment]\n"
         "environment = " + test::fixture("chain.mdp").string() + "\n"
         "algorithm = page-pg\n"
         "runs = 3\n"
         "seed = 11\n"
         "max_updates = 30\n"
         "bucket_width = 50\n"
         "[optimizer]\n"
         "eta = 0.1\n"
         "large_batch = 20\n"
         "small_batch = 4\n"
         "p = 0.3\n"
         "gamma = 0.9\n" + extra;
}

TEST(Config, ParsesSectionsCommentsAndCounts) {
  const auto cfg = make_run_config(parse(
      "# top comment\n"
      "[experiment]\n"
      "environment = acrobot   # trailing\n"
      "algorithm = STORM_PG\n"
      "episode_budget = 1e5\n"
      "[policy]\n"
      "hidden = 16, 8\n"
      "[optimizer]\n"
      "alpha = 0.9\n"));
  EXPECT_EQ(cfg.environment, "acrobot");
  EXPECT_EQ(cfg.optimizer.algorithm, Algorithm::kStormPg);
  EXPECT_EQ(cfg.optimizer.episode_budget, 100000u);
  EXPECT_EQ(cfg.hidden, (std::vector<int>{16, 8}));
  EXPECT_DOUBLE_EQ(cfg.optimizer.alpha, 0.9);
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_EQ(parse_error_line("[experiment]\nruns = 2\nbogus = 1\n"), 3);
  EXPECT_EQ(parse_error_line("\n\nruns = 2\n"), 3);
  EXPECT_EQ(parse_error_line("[experiment]\n[nope]\n"), 2);
  EXPECT_EQ(parse_error_line("[experiment]\nruns = 2\nruns = 3\n"), 3);
  EXPECT_EQ(parse_error_line("[optimizer]\n\neta = fast\n"), 3);
  EXPECT_EQ(parse_error_line("[experiment]\nruns = 1.5\n"), 2);
  EXPECT_EQ(parse_error_line("[optimizer]\neta = 1e-3,\n"), 2);
  EXPECT_EQ(parse_error_line("[experiment]\nruns\n"), 2);
}

TEST(Config, UnknownAlgorithmListsChoices) {
  try {
    make_run_config(parse("[experiment]\n\nalgorithm = adam\n"));
    FAIL();
  } catch (const ArgumentError& e) {
    const std::string what = e.what();
    EXPECT_EQ(what.rfind("line 3: ", 0), 0u) << what;
    EXPECT_NE(what.find("page-pg"), std::string::npos) << what;
  }
}

TEST(Config, ListsOnlyInGrids) {
  EXPECT_EQ(parse_error_line("[optimizer]\neta = 1e-3, 1e-4\n"), 2);
  EXPECT_NO_THROW(make_grid(parse("[optimizer]\neta = 1e-3, 1e-4\n")));
  try {
    make_grid(parse("[experiment]\nruns = 1, 2\n"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(Config, OutputDirectoryPrecedence) {
  ::unsetenv(kOutDirEnv);
  EXPECT_EQ(make_run_config(parse("")).out_dir, fs::path("vrpg-out"));
  ::setenv(kOutDirEnv, "/tmp/from-env", 1);
  EXPECT_EQ(make_run_config(parse("")).out_dir, fs::path("/tmp/from-env"));
  const auto with_cfg = parse("[experiment]\nout_dir = from-config\n");
  EXPECT_EQ(make_run_config(with_cfg).out_dir, fs::path("from-config"));
  Overrides o;
  o.out_dir = "from-flag";
  EXPECT_EQ(make_run_config(with_cfg, o).out_dir, fs::path("from-flag"));
  ::unsetenv(kOutDirEnv);
}

TEST(Config, ShippedExamplesParse) {
  for (const auto& entry : fs::directory_iterator(VRPG_TEST_CONFIG_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    const auto cfg = ConfigFile::load(entry.path());
    EXPECT_NO_THROW(make_grid(cfg)) << entry.path();
  }
}

TEST(Grid, ProductOrderLastAxisFastest) {
  const auto points = make_grid(parse(
      "[experiment]\nalgorithm = gpomdp, page-pg\n[optimizer]\neta = 1, 2, 3\n"));
  ASSERT_EQ(points.size(), 6u);
  const std::vector<std::pair<std::string, std::string>> want[] = {
      {{"experiment.algorithm", "gpomdp"}, {"optimizer.eta", "1"}},
      {{"experiment.algorithm", "gpomdp"}, {"optimizer.eta", "2"}},
      {{"experiment.algorithm", "gpomdp"}, {"optimizer.eta", "3"}},
      {{"experiment.algorithm", "page-pg"}, {"optimizer.eta", "1"}},
      {{"experiment.algorithm", "page-pg"}, {"optimizer.eta", "2"}},
      {{"experiment.algorithm", "page-pg"}, {"optimizer.eta", "3"}}};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(points[i].assignment, want[i]) << i;
  EXPECT_EQ(points[4].config.optimizer.algorithm, Algorithm::kPagePg);
  EXPECT_DOUBLE_EQ(points[4].config.optimizer.eta, 2.0);
}

TEST(Grid, CapNamesTheProductSize) {
  try {
    make_grid(parse("[optimizer]\neta = 1, 2, 3\nalpha = 0.1, 0.2\n[grid]\ncap = 5\n"));
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("6 points"), std::string::npos) << e.what();
  }
}

TrainSummary summary_with(double ret, double eps) {
  TrainSummary s;
  s.mean_final_return = ret;
  s.mean_final_episodes = eps;
  return s;
}

TEST(Grid, PickBestTieBreaks) {
  const double nan = std::nan("");
  EXPECT_EQ(pick_best({summary_with(nan, 1), summary_with(-5, 9)}), 1u);
  EXPECT_EQ(pick_best({summary_with(3, 100), summary_with(4, 900), summary_with(4, 500)}), 2u);
  EXPECT_EQ(pick_best({summary_with(4, 500), summary_with(4, 500)}), 0u);
  EXPECT_EQ(pick_best({summary_with(nan, 5), summary_with(nan, 2)}), 1u);
}

TEST(Csv, NumbersRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 1e22, 0.0}) {
    EXPECT_EQ(std::stod(format_number(x)), x);
  }
  EXPECT_EQ(format_number(std::nan("")), "nan");
  EXPECT_EQ(format_number(-HUGE_VAL), "-inf");
}

TEST(Csv, AggregateCarriesForwardAndSkipsAborts) {
  auto rec = [](std::size_t eps, double ret, const char* branch = "full") {
    RunRecord r;
    r.cum_episodes = eps;
    r.avg_return = ret;
    r.branch = branch;
    return r;
  };
  const std::vector<std::vector<RunRecord>> runs = {
      {rec(10, 1.0), rec(15, 2.0), rec(35, 4.0)},
      {rec(25, 6.0), rec(30, std::nan(""), "abort")},
  };
  const auto rows = aggregate_runs(runs, 10);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].runs, 1u);
  EXPECT_DOUBLE_EQ(rows[0].mean, 1.0);
  EXPECT_EQ(rows[1].runs, 1u);  // run 0 carries 2.0 forward, run 1 has no row yet
  EXPECT_DOUBLE_EQ(rows[1].mean, 2.0);
  EXPECT_EQ(rows[2].runs, 1u);  // run 1 aborted inside (20, 30]
  EXPECT_DOUBLE_EQ(rows[2].mean, 2.0);
  EXPECT_EQ(rows[3].runs, 1u);
  EXPECT_DOUBLE_EQ(rows[3].mean, 4.0);
  EXPECT_DOUBLE_EQ(rows[3].std, 0.0);
  const auto two = aggregate_runs({{rec(5, 1.0)}, {rec(5, 3.0)}}, 10);
  EXPECT_DOUBLE_EQ(two[0].std, 1.0);  // population deviation
}

TEST(Train, WritesSchemaAndRecomputableAggregate) {
  auto cfg = make_run_config(parse(chain_config()));
  cfg.out_dir = test::scratch_dir("train_schema");
  const auto summary = train(cfg);
  ASSERT_EQ(summary.runs.size(), 3u);
  std::vector<std::vector<RunRecord>> runs;
  for (std::size_t r = 0; r < 3; ++r) {
    const auto path = cfg.out_dir / ("run_" + std::to_string(r) + ".csv");
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, kRunCsvHeader);
    runs.push_back(read_run_csv(path));
    ASSERT_EQ(runs.back().size(), 31u);
    EXPECT_EQ(runs.back().front().branch, "full");
    EXPECT_EQ(runs.back().back().iteration, 30u);
    for (const auto& rec : runs.back()) {
      EXPECT_EQ(rec.run_id, r);
      EXPECT_EQ(rec.ms, 0.0);
    }
    EXPECT_TRUE(fs::exists(cfg.out_dir / ("run_" + std::to_string(r) + ".final.theta")));
    const ParamVector theta = load_params(cfg.out_dir / ("run_" + std::to_string(r) + ".final.theta"));
    EXPECT_EQ(theta, summary.runs[r].final_theta);
  }

  std::ifstream agg(summary.aggregate_csv);
  std::string line;
  std::getline(agg, line);
  EXPECT_EQ(line, kAggregateCsvHeader);
  const auto expect = aggregate_runs(runs, 50);
  std::size_t n = 0;
  while (std::getline(agg, line)) {
    ASSERT_LT(n, expect.size());
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> f;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    ASSERT_EQ(f.size(), 5u);
    EXPECT_EQ(std::stoul(f[1]), expect[n].episodes);
    EXPECT_NEAR(std::stod(f[2]), expect[n].mean, 1e-12);
    EXPECT_NEAR(std::stod(f[3]), expect[n].std, 1e-12);
    EXPECT_EQ(std::stoul(f[4]), expect[n].runs);
    ++n;
  }
  EXPECT_EQ(n, expect.size());
  EXPECT_GT(n, 0u);
}

TEST(Train, ZeroBudgetWritesHeadersOnly) {
  auto cfg = make_run_config(parse(chain_config()));
  cfg.optimizer.max_updates = 0;
  cfg.optimizer.episode_budget = 0;
  cfg.out_dir = test::scratch_dir("train_zero");
  const auto summary = train(cfg);
  EXPECT_EQ(slurp(cfg.out_dir / "run_0.csv"), std::string(kRunCsvHeader) + "\n");
  EXPECT_EQ(slurp(summary.aggregate_csv), std::string(kAggregateCsvHeader) + "\n");
}

TEST(Train, OutputIndependentOfThreadCount) {
  std::string reference;
  for (int threads : {1, 2, 4}) {
    Overrides o;
    o.threads = threads;
    o.out_dir = test::scratch_dir("train_threads_" + std::to_string(threads));
    const auto cfg = make_run_config(parse(chain_config()), o);
    train(cfg);
    std::string all;
    for (const char* f : {"run_0.csv", "run_1.csv", "run_2.csv", "aggregate.csv",
                          "run_2.final.theta", "run_1.selected.theta"}) {
      all += slurp(cfg.out_dir / f);
    }
    if (reference.empty()) reference = all;
    EXPECT_EQ(all, reference) << threads;
  }
}

TEST(Train, DivergenceAppendsAbortRow) {
  // Rewards of 1e308 overflow the return to infinity.
  const auto dir = test::scratch_dir("train_abort");
  const auto mdp = dir / "huge.mdp";
  std::ofstream(mdp) << "states = 1\nactions = 2\nhorizon = 2\nreward_bound = 1e308\n"
                        "initial = 1\n[rewards]\n1e308 1e308\n[transitions]\n0 0 : 1\n0 1 : 1\n";
  auto cfg = make_run_config(parse(chain_config()));
  cfg.environment = mdp.string();
  cfg.runs = 1;
  cfg.out_dir = dir / "out";
  const auto summary = train(cfg);
  ASSERT_TRUE(summary.runs[0].diverged);
  EXPECT_TRUE(std::isnan(summary.mean_final_return));
  const auto rows = read_run_csv(cfg.out_dir / "run_0.csv");
  EXPECT_EQ(rows.back().branch, "abort");
}

TEST(GridRun, SinglePointMatchesTrain) {
  const std::string text = chain_config("[grid]\ncap = 4\n");
  auto cfg = make_run_config(parse(text));
  cfg.out_dir = test::scratch_dir("grid_single_train");
  train(cfg);
  const auto dir = test::scratch_dir("grid_single");
  const auto summary = grid(make_grid(parse(text)), dir);
  EXPECT_EQ(summary.best, 0u);
  for (const char* f : {"run_0.csv", "run_2.csv", "aggregate.csv", "run_1.final.theta"}) {
    EXPECT_EQ(slurp(dir / "point_0" / f), slurp(cfg.out_dir / f)) << f;
  }
  EXPECT_TRUE(fs::exists(dir / "grid.csv"));
}

TEST(GridRun, ResultsTableMarksBest) {
  const auto dir = test::scratch_dir("grid_table");
  const auto points = make_grid(parse(chain_config().replace(chain_config().find("eta = 0.1"), 9,
                                                             "eta = 0, 0.5")));
  ASSERT_EQ(points.size(), 2u);
  const auto summary = grid(points, dir);
  std::ifstream in(summary.results_csv);
  std::string header, row0, row1;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  EXPECT_EQ(header, "point,optimizer.eta,mean_final_return,mean_final_episodes,diverged_runs,best");
  EXPECT_EQ(row0.rfind("0,0,", 0), 0u);
  EXPECT_EQ(row1.rfind("1,0.5,", 0), 0u);
  EXPECT_EQ(summary.best, pick_best(summary.points));
  EXPECT_EQ((summary.best == 0 ? row0 : row1).back(), '1');
}

}  // namespace
}  // namespace vrpg
