#include "vrpg/envs.hpp"
#include "vrpg/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace vrpg {

namespace fs = std::filesystem;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string format_run_record(const RunRecord& r) {
  std::string out;
  out += std::to_string(r.run_id);
  out += ',';
  out += std::to_string(r.iteration);
  out += ',';
  out += std::to_string(r.cum_episodes);
  out += ',';
  out += r.branch;
  out += ',';
  out += format_number(r.avg_return);
  out += ',';
  out += format_number(r.v_norm);
  out += ',';
  out += format_number(r.ms);
  return out;
}

namespace {

double parse_field(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad number '" + s + "'");
  }
  return x;
}

std::size_t parse_index(const std::string& s) {
  std::size_t x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad integer '" + s + "'");
  }
  return x;
}

}  // namespace

std::vector<RunRecord> read_run_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kRunCsvHeader) {
    throw ParseError(1, path.string() + ": unexpected header");
  }
  std::vector<RunRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw ParseError(lineno, path.string() + ": expected 7 columns");
    try {
      out.push_back({parse_index(f[0]), parse_index(f[1]), parse_index(f[2]), f[3],
                     parse_field(f[4]), parse_field(f[5]), parse_field(f[6])});
    } catch (const std::invalid_argument& e) {
      throw ParseError(lineno, path.string() + ": " + e.what());
    }
  }
  return out;
}

std::vector<AggregateRow> aggregate_runs(const std::vector<std::vector<RunRecord>>& runs,
                                         std::size_t bucket_width) {
  if (bucket_width == 0) throw ArgumentError("bucket width must be at least 1");
  std::size_t max_episodes = 0;
  for (const auto& run : runs) {
    for (const auto& r : run) {
      if (r.branch != "abort") max_episodes = std::max(max_episodes, r.cum_episodes);
    }
  }
  const std::size_t buckets = (max_episodes + bucket_width - 1) / bucket_width;
  std::vector<AggregateRow> out;
  std::vector<std::size_t> cursor(runs.size(), 0);
  std::vector<std::optional<double>> current(runs.size());
  for (std::size_t b = 0; b < buckets; ++b) {
    const std::size_t edge = (b + 1) * bucket_width;
    std::vector<double> values;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const auto& run = runs[k];
      while (cursor[k] < run.size() && run[cursor[k]].cum_episodes <= edge) {
        const RunRecord& r = run[cursor[k]];
        if (r.branch != "abort" && std::isfinite(r.avg_return)) current[k] = r.avg_return;
        else if (r.branch == "abort") current[k].reset();
        ++cursor[k];
      }
      if (current[k]) values.push_back(*current[k]);
    }
    AggregateRow row;
    row.bucket = b;
    row.episodes = edge;
    row.runs = values.size();
    if (values.empty()) {
      row.mean = row.std = std::numeric_limits<double>::quiet_NaN();
    } else {
      double sum = 0.0;
      for (double v : values) sum += v;
      row.mean = sum / static_cast<double>(values.size());
      double sq = 0.0;
      for (double v : values) sq += (v - row.mean) * (v - row.mean);
      row.std = std::sqrt(sq / static_cast<double>(values.size()));
    }
    out.push_back(row);
  }
  return out;
}

std::string format_aggregate_row(const AggregateRow& r) {
  return std::to_string(r.bucket) + ',' + std::to_string(r.episodes) + ',' +
         format_number(r.mean) + ',' + format_number(r.std) + ',' + std::to_string(r.runs);
}

std::unique_ptr<Environment> make_run_environment(const RunConfig& cfg) {
  return make_environment(cfg.environment);
}

std::unique_ptr<Policy> make_run_policy(const RunConfig& cfg, const Environment& env) {
  const auto* tabular = dynamic_cast<const TabularEnv*>(&env);
  std::string kind = cfg.policy;
  if (kind == "auto") kind = tabular ? "tabular" : "mlp";
  if (kind == "tabular") {
    if (!tabular) throw ConfigError("tabular policy needs a tabular environment");
    return std::make_unique<TabularSoftmaxPolicy>(tabular->spec().state_count,
                                                  tabular->spec().action_count);
  }
  std::vector<int> widths{static_cast<int>(env.state_dim())};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(env.action_count());
  return std::make_unique<MlpSoftmaxPolicy>(widths);
}

namespace {

struct RunOutput {
  RunOutcome outcome;
  std::vector<RunRecord> records;
  std::string log_line;
};

RunOutput train_one(const RunConfig& cfg, const Environment& env, const Policy& policy,
                    std::size_t run_id, int threads) {
  RunOutput out;
  out.outcome.csv = cfg.out_dir / ("run_" + std::to_string(run_id) + ".csv");
  std::ofstream csv(out.outcome.csv, std::ios::trunc);
  if (!csv) throw ConfigError("cannot write " + out.outcome.csv.string());
  csv << kRunCsvHeader << '\n';

  const OptimizerConfig& base = cfg.optimizer;
  if (base.episode_budget == 0 && base.max_updates == 0) {
    out.log_line = "run " + std::to_string(run_id) + ": zero budget, no episodes drawn";
    out.outcome.final_return = std::numeric_limits<double>::quiet_NaN();
    return out;
  }

  OptimizerConfig opt = base;
  opt.threads = threads;
  const std::uint64_t seed = cfg.run_seed(run_id);
  const auto start = std::chrono::steady_clock::now();
  std::size_t pending = 0;
  auto on_row = [&](const IterateRow& row) {
    RunRecord rec;
    rec.run_id = run_id;
    rec.iteration = row.iteration;
    rec.cum_episodes = row.cum_episodes;
    rec.branch = to_string(row.branch);
    rec.avg_return = row.avg_return;
    rec.v_norm = row.v_norm;
    if (cfg.timing) {
      rec.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                   .count();
    }
    csv << format_run_record(rec) << '\n';
    if (++pending == 64) {
      csv.flush();
      pending = 0;
    }
    out.records.push_back(std::move(rec));
  };
  RunResult result = run_optimizer(env, policy, opt, seed, std::nullopt, on_row);

  RunOutcome& o = out.outcome;
  o.updates = result.final_state.iteration;
  o.cum_episodes = result.final_state.cum_episodes;
  o.diverged = result.diverged;
  o.diagnostic = result.diagnostic;
  o.final_theta = result.final_state.theta;
  if (result.diverged) {
    RunRecord abort;
    abort.run_id = run_id;
    abort.iteration = o.updates;
    abort.cum_episodes = o.cum_episodes;
    abort.branch = "abort";
    abort.avg_return = abort.v_norm = std::numeric_limits<double>::quiet_NaN();
    csv << format_run_record(abort) << '\n';
    out.records.push_back(abort);
    o.final_return = std::numeric_limits<double>::quiet_NaN();
  } else {
    o.final_return = out.records.back().avg_return;
  }
  if (!result.iterates.empty()) {
    Rng pick = Rng::stream(seed, StreamTag::kOutput);
    o.selected_theta = select_output(result.iterates, pick);
  } else {
    o.selected_theta = o.final_theta;
  }
  save_params(cfg.out_dir / ("run_" + std::to_string(run_id) + ".final.theta"), o.final_theta);
  save_params(cfg.out_dir / ("run_" + std::to_string(run_id) + ".selected.theta"),
              o.selected_theta);

  std::ostringstream line;
  line << "run " << run_id << " (seed " << seed << "): " << o.updates << " updates, "
       << o.cum_episodes << " episodes, final return " << format_number(o.final_return);
  if (o.diverged) line << " [aborted: " << o.diagnostic << "]";
  out.log_line = line.str();
  return out;
}

}  // namespace

TrainSummary train(const RunConfig& cfg, std::ostream* log) {
  const bool zero_budget = cfg.optimizer.episode_budget == 0 && cfg.optimizer.max_updates == 0;
  if (!zero_budget) cfg.optimizer.validate();
  if (cfg.runs == 0) throw ArgumentError("runs must be at least 1");
  fs::create_directories(cfg.out_dir);
  const auto env = make_run_environment(cfg);
  const auto policy = make_run_policy(cfg, *env);

  // Seeds run side by side; leftover threads go to within-batch sampling.
  const int threads = std::max(1, cfg.optimizer.threads);
  const int outer = static_cast<int>(std::min<std::size_t>(threads, cfg.runs));
  const int inner = std::max(1, threads / outer);
  std::vector<RunOutput> outputs(cfg.runs);
  parallel_for(cfg.runs, outer, [&](std::size_t r) {
    outputs[r] = train_one(cfg, *env, *policy, r, inner);
  });

  TrainSummary summary;
  std::vector<std::vector<RunRecord>> records;
  double ret = 0.0;
  double eps = 0.0;
  for (auto& o : outputs) {
    if (log) *log << o.log_line << '\n';
    ret += o.outcome.final_return;
    eps += static_cast<double>(o.outcome.cum_episodes);
    records.push_back(std::move(o.records));
    summary.runs.push_back(std::move(o.outcome));
  }
  summary.mean_final_return = ret / static_cast<double>(cfg.runs);
  summary.mean_final_episodes = eps / static_cast<double>(cfg.runs);

  summary.aggregate_csv = cfg.out_dir / "aggregate.csv";
  std::ofstream agg(summary.aggregate_csv, std::ios::trunc);
  if (!agg) throw ConfigError("cannot write " + summary.aggregate_csv.string());
  agg << kAggregateCsvHeader << '\n';
  for (const auto& row : aggregate_runs(records, cfg.bucket_width)) {
    agg << format_aggregate_row(row) << '\n';
  }
  return summary;
}

std::size_t pick_best(const std::vector<TrainSummary>& points) {
  if (points.empty()) throw ArgumentError("pick_best: no grid points");
  auto better = [](const TrainSummary& a, const TrainSummary& b) {
    const bool a_ok = std::isfinite(a.mean_final_return);
    const bool b_ok = std::isfinite(b.mean_final_return);
    if (a_ok != b_ok) return a_ok;
    if (a_ok && a.mean_final_return != b.mean_final_return) {
      return a.mean_final_return > b.mean_final_return;
    }
    return a.mean_final_episodes < b.mean_final_episodes;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (better(points[i], points[best])) best = i;
  }
  return best;
}

GridSummary grid(const std::vector<GridPoint>& points, const fs::path& out_dir, std::ostream* log) {
  if (points.empty()) throw ArgumentError("grid: no points");
  fs::create_directories(out_dir);
  GridSummary summary;
  for (std::size_t i = 0; i < points.size(); ++i) {
    RunConfig cfg = points[i].config;
    cfg.out_dir = out_dir / ("point_" + std::to_string(i));
    if (log) {
      *log << "point " << i << ":";
      for (const auto& [k, v] : points[i].assignment) *log << ' ' << k << '=' << v;
      *log << '\n';
    }
    summary.points.push_back(train(cfg, log));
  }
  summary.best = pick_best(summary.points);

  summary.results_csv = out_dir / "grid.csv";
  std::ofstream csv(summary.results_csv, std::ios::trunc);
  if (!csv) throw ConfigError("cannot write " + summary.results_csv.string());
  csv << "point";
  for (const auto& [k, v] : points[0].assignment) csv << ',' << k;
  csv << ",mean_final_return,mean_final_episodes,diverged_runs,best\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    csv << i;
    for (const auto& [k, v] : points[i].assignment) csv << ',' << v;
    std::size_t diverged = 0;
    for (const auto& r : summary.points[i].runs) diverged += r.diverged ? 1 : 0;
    csv << ',' << format_number(summary.points[i].mean_final_return) << ','
        << format_number(summary.points[i].mean_final_episodes) << ',' << diverged << ','
        << (i == summary.best ? 1 : 0) << '\n';
  }
  return summary;
}

}  // namespace vrpg
