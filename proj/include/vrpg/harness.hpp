#pragma once

#include "vrpg/common.hpp"
#include "vrpg/optimizers.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vrpg {

/// Plain-text experiment configuration:
///
///     # comment
///     [experiment]
///     environment = cartpole
///     runs = 5
///     [optimizer]
///     eta = 1e-4, 5e-5      # comma-separated values form a list
///
/// Keys are addressed as "section.key". Keys outside any section are not
/// accepted. Duplicate and unknown keys are reported with their line.
class ConfigFile {
 public:
  struct Entry {
    std::string key;
    std::vector<std::string> values;
    int line = 0;
  };

  static ConfigFile parse(std::istream& in, std::filesystem::path origin = {});
  static ConfigFile load(const std::filesystem::path& path);

  const Entry* find(const std::string& key) const;
  const std::vector<Entry>& entries() const { return entries_; }
  /// Directory of the file the config was loaded from (empty for streams).
  const std::filesystem::path& base_dir() const { return base_dir_; }

  /// Replaces (or adds) a single-valued entry; used for command-line overrides.
  void set(const std::string& key, const std::string& value);

 private:
  std::vector<Entry> entries_;
  std::filesystem::path base_dir_;
};

/// Every key the harness understands, as "section.key".
const std::vector<std::string>& known_config_keys();
/// Keys that may hold several values in a grid config.
const std::vector<std::string>& grid_config_keys();

struct RunConfig {
  std::string environment = "cartpole";  // "cartpole", "acrobot" or an MDP file
  std::string policy = "auto";           // "mlp", "tabular" or "auto"
  std::vector<int> hidden{32, 32};       // MLP hidden widths
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  std::size_t runs = 1;
  std::filesystem::path out_dir;
  std::size_t bucket_width = 1000;  // episodes per aggregate bucket
  bool timing = false;              // fill the ms column with wall-clock time

  /// Run r uses master seed `seed + r`.
  std::uint64_t run_seed(std::size_t r) const { return seed + r; }
};

/// Command-line overrides, applied on top of the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  std::optional<int> threads;
};

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "VRPG_OUT_DIR";

/// Builds a RunConfig. Lists are rejected (ParseError naming the line).
/// Output directory precedence: override, config, $VRPG_OUT_DIR, "vrpg-out".
RunConfig make_run_config(const ConfigFile& config, const Overrides& overrides = {});

/// One point per element of the cartesian product of the grid keys, in the
/// order the keys appear in the file (first key varies slowest). Throws
/// ArgumentError naming the product size if it exceeds `grid.cap`.
struct GridPoint {
  RunConfig config;
  std::vector<std::pair<std::string, std::string>> assignment;  // key -> value
};
std::vector<GridPoint> make_grid(const ConfigFile& config, const Overrides& overrides = {});

// ---------------------------------------------------------------------------
// CSV records

/// One per-run CSV row. Column order is fixed by kRunCsvHeader.
struct RunRecord {
  std::size_t run_id = 0;
  std::size_t iteration = 0;
  std::size_t cum_episodes = 0;
  std::string branch;
  double avg_return = 0.0;
  double v_norm = 0.0;
  double ms = 0.0;
};

inline constexpr const char* kRunCsvHeader = "run_id,iteration,cum_episodes,branch,avg_return,v_norm,ms";
inline constexpr const char* kAggregateCsvHeader = "bucket,episodes,mean,std,runs";

/// Shortest round-trip decimal form ("nan", "inf", "-inf" for non-finite).
std::string format_number(double x);
std::string format_run_record(const RunRecord& r);
std::vector<RunRecord> read_run_csv(const std::filesystem::path& path);

/// Per-bucket statistics across runs. Bucket b covers cumulative episodes
/// (b * width, (b + 1) * width]; a run's value in a bucket is the return of
/// its last row at or before the bucket's upper edge. Runs with no row yet,
/// and abort rows, do not contribute. std is the population deviation.
struct AggregateRow {
  std::size_t bucket = 0;
  std::size_t episodes = 0;  // upper edge
  double mean = 0.0;
  double std = 0.0;
  std::size_t runs = 0;
};
std::vector<AggregateRow> aggregate_runs(const std::vector<std::vector<RunRecord>>& runs,
                                         std::size_t bucket_width);
std::string format_aggregate_row(const AggregateRow& r);

// ---------------------------------------------------------------------------
// Commands

std::unique_ptr<Environment> make_run_environment(const RunConfig& cfg);
std::unique_ptr<Policy> make_run_policy(const RunConfig& cfg, const Environment& env);

struct RunOutcome {
  std::filesystem::path csv;
  std::size_t updates = 0;
  std::size_t cum_episodes = 0;
  double final_return = 0.0;  // last batch return; NaN if the run diverged
  bool diverged = false;
  std::string diagnostic;
  ParamVector final_theta;
  ParamVector selected_theta;  // uniform draw over stored iterates
};

struct TrainSummary {
  std::vector<RunOutcome> runs;
  std::filesystem::path aggregate_csv;
  double mean_final_return = 0.0;  // NaN if any run diverged
  double mean_final_episodes = 0.0;
};

/// Writes run_<r>.csv for every run and aggregate.csv into cfg.out_dir.
/// A run with zero budget (no episode budget and no update limit) produces
/// a header-only CSV. `log` receives one summary line per run.
TrainSummary train(const RunConfig& cfg, std::ostream* log = nullptr);

struct GridSummary {
  std::vector<TrainSummary> points;
  std::size_t best = 0;
  std::filesystem::path results_csv;
};

/// Trains every grid point into <out_dir>/point_<i> and writes grid.csv.
/// The best point has the highest mean final return (NaN ranks last), then
/// the fewest mean cumulative episodes, then the lowest index.
GridSummary grid(const std::vector<GridPoint>& points, const std::filesystem::path& out_dir,
                 std::ostream* log = nullptr);
std::size_t pick_best(const std::vector<TrainSummary>& points);

// ---------------------------------------------------------------------------
// Verification suites

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured quantity
  double threshold = 0.0;  // bound it was compared against
  std::string detail;
};

struct SuiteOptions {
  std::filesystem::path fixture_dir;
  std::uint64_t seed = 12345;
  std::size_t mc_samples = 100000;
  std::size_t accounting_runs = 200;
  int threads = 1;
};

/// "gradients", "unbiasedness", "variance", "reductions", "accounting",
/// "theory".
const std::vector<std::string>& suite_names();
std::vector<CheckResult> run_suite(const std::string& suite, const SuiteOptions& options);
/// Fixture files (*.mdp) in the directory, sorted by name.
std::vector<std::filesystem::path> fixture_files(const std::filesystem::path& dir);
/// The directory compiled in as the default fixture location, unless
/// VRPG_FIXTURE_DIR is set.
std::filesystem::path default_fixture_dir();
std::string format_check(const CheckResult& c);

}  // namespace vrpg
