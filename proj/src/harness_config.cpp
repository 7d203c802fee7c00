#include "vrpg/harness.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace vrpg {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& raw, int line, const std::string& key) {
  std::vector<std::string> out;
  std::stringstream in(raw);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ParseError(line, "empty value in list for '" + key + "'");
    out.push_back(item);
  }
  if (!raw.empty() && raw.back() == ',') throw ParseError(line, "trailing comma for '" + key + "'");
  if (out.empty()) throw ParseError(line, "missing value for '" + key + "'");
  return out;
}

const std::vector<std::string> kSections = {"experiment", "policy", "optimizer", "grid"};

// Typed access to one entry; every failure names the entry's line.
class Reader {
 public:
  explicit Reader(const ConfigFile& cfg) : cfg_(cfg) {}

  const ConfigFile::Entry* single(const std::string& key) const {
    const auto* e = cfg_.find(key);
    if (e && e->values.size() != 1) {
      throw ParseError(e->line, "'" + key + "' takes a single value (lists are only valid in " +
                                    "grid configs for grid keys)");
    }
    return e;
  }

  template <typename F>
  auto with(const std::string& key, F&& convert) const
      -> std::optional<decltype(convert(std::string{}))> {
    const auto* e = single(key);
    if (!e) return std::nullopt;
    try {
      return convert(e->values[0]);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& ex) {
      throw ParseError(e->line, key + ": " + ex.what());
    }
  }

  std::optional<std::string> text(const std::string& key) const {
    return with(key, [](const std::string& v) { return v; });
  }

  std::optional<double> number(const std::string& key) const {
    return with(key, [&](const std::string& v) { return parse_double(v); });
  }

  std::optional<std::size_t> count(const std::string& key) const {
    return with(key, [&](const std::string& v) { return parse_count(v); });
  }

  std::optional<bool> flag(const std::string& key) const {
    return with(key, [](const std::string& v) {
      if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
      if (v == "false" || v == "no" || v == "0" || v == "off") return false;
      throw std::invalid_argument("expected true or false, got '" + v + "'");
    });
  }

  static double parse_double(const std::string& v) {
    if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0' || errno == ERANGE) {
      throw std::invalid_argument("expected a number, got '" + v + "'");
    }
    return x;
  }

  static std::size_t parse_count(const std::string& v) {
    const double x = parse_double(v);  // admits 1e5
    if (!(x >= 0.0) || x != std::floor(x) || x > 9.0e15) {
      throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
    }
    return static_cast<std::size_t>(x);
  }

 private:
  const ConfigFile& cfg_;
};

}  // namespace

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "experiment.environment", "experiment.algorithm",  "experiment.runs",
      "experiment.seed",        "experiment.episode_budget", "experiment.max_updates",
      "experiment.out_dir",     "experiment.bucket_width", "experiment.store_every",
      "experiment.threads",     "experiment.timing",      "policy.kind",
      "policy.hidden",          "optimizer.estimator",    "optimizer.eta",
      "optimizer.large_batch",  "optimizer.small_batch",  "optimizer.inner_length",
      "optimizer.alpha",        "optimizer.p",            "optimizer.p_end",
      "optimizer.gamma",        "optimizer.clip",         "optimizer.allow_degenerate",
      "grid.cap"};
  return keys;
}

const std::vector<std::string>& grid_config_keys() {
  static const std::vector<std::string> keys = {
      "experiment.algorithm", "optimizer.estimator",    "optimizer.eta",
      "optimizer.large_batch", "optimizer.small_batch", "optimizer.inner_length",
      "optimizer.alpha",      "optimizer.p",            "optimizer.p_end",
      "optimizer.gamma",      "optimizer.clip"};
  return keys;
}

ConfigFile ConfigFile::parse(std::istream& in, std::filesystem::path origin) {
  ConfigFile cfg;
  if (!origin.empty()) cfg.base_dir_ = origin.parent_path();
  const auto& known = known_config_keys();
  std::string section;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ParseError(line, "unterminated section header");
      section = trim(text.substr(1, text.size() - 2));
      if (std::find(kSections.begin(), kSections.end(), section) == kSections.end()) {
        throw ParseError(line, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError(line, "expected 'key = value'");
    const std::string name = trim(text.substr(0, eq));
    if (name.empty()) throw ParseError(line, "missing key before '='");
    if (section.empty()) throw ParseError(line, "key '" + name + "' outside any [section]");
    const std::string key = section + "." + name;
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ParseError(line, "unknown key '" + key + "'");
    }
    if (const Entry* prev = cfg.find(key)) {
      throw ParseError(line, "duplicate key '" + key + "' (first set on line " +
                                 std::to_string(prev->line) + ")");
    }
    cfg.entries_.push_back({key, split_list(trim(text.substr(eq + 1)), line, key), line});
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse(in, path);
}

const ConfigFile::Entry* ConfigFile::find(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

void ConfigFile::set(const std::string& key, const std::string& value) {
  for (auto& e : entries_) {
    if (e.key == key) {
      e.values = {value};
      return;
    }
  }
  entries_.push_back({key, {value}, 0});
}

RunConfig make_run_config(const ConfigFile& config, const Overrides& overrides) {
  const Reader r(config);
  RunConfig cfg;
  OptimizerConfig& opt = cfg.optimizer;

  if (auto v = r.text("experiment.environment")) {
    cfg.environment = *v;
    if (cfg.environment != "cartpole" && cfg.environment != "acrobot") {
      std::filesystem::path p(cfg.environment);
      if (p.is_relative() && !config.base_dir().empty()) {
        cfg.environment = (config.base_dir() / p).lexically_normal().string();
      }
    }
  }
  if (auto v = r.text("experiment.algorithm")) {
    try {
      opt.algorithm = parse_algorithm(*v);
    } catch (const ArgumentError& e) {
      throw ArgumentError("line " + std::to_string(config.find("experiment.algorithm")->line) +
                          ": " + e.what());
    }
  }
  if (auto v = r.count("experiment.runs")) cfg.runs = *v;
  if (auto v = r.count("experiment.seed")) cfg.seed = *v;
  if (auto v = r.count("experiment.episode_budget")) opt.episode_budget = *v;
  if (auto v = r.count("experiment.max_updates")) opt.max_updates = *v;
  if (auto v = r.text("experiment.out_dir")) cfg.out_dir = *v;
  if (auto v = r.count("experiment.bucket_width")) cfg.bucket_width = *v;
  if (auto v = r.count("experiment.store_every")) opt.store_every = *v;
  if (auto v = r.count("experiment.threads")) opt.threads = static_cast<int>(*v);
  if (auto v = r.flag("experiment.timing")) cfg.timing = *v;

  if (auto v = r.text("policy.kind")) {
    if (*v != "mlp" && *v != "tabular" && *v != "auto") {
      throw ParseError(config.find("policy.kind")->line,
                       "policy.kind must be mlp, tabular or auto, got '" + *v + "'");
    }
    cfg.policy = *v;
  }
  if (const auto* e = config.find("policy.hidden")) {
    cfg.hidden.clear();
    for (const auto& v : e->values) {
      try {
        const std::size_t w = Reader::parse_count(v);
        if (w == 0) throw std::invalid_argument("hidden widths must be positive");
        cfg.hidden.push_back(static_cast<int>(w));
      } catch (const std::exception& ex) {
        throw ParseError(e->line, std::string("policy.hidden: ") + ex.what());
      }
    }
  }

  if (auto v = r.with("optimizer.estimator", parse_estimator_kind)) opt.estimator = *v;
  if (auto v = r.number("optimizer.eta")) opt.eta = *v;
  if (auto v = r.count("optimizer.large_batch")) opt.large_batch = *v;
  if (auto v = r.count("optimizer.small_batch")) opt.small_batch = *v;
  if (auto v = r.count("optimizer.inner_length")) opt.inner_length = *v;
  if (auto v = r.number("optimizer.alpha")) opt.alpha = *v;
  if (auto v = r.number("optimizer.p")) opt.switch_prob = SwitchSchedule::constant(*v);
  if (auto v = r.number("optimizer.p_end")) opt.switch_prob.end = *v;
  if (auto v = r.number("optimizer.gamma")) opt.gamma = *v;
  if (auto v = r.number("optimizer.clip")) opt.clip.max_weight = *v;
  if (auto v = r.flag("optimizer.allow_degenerate")) opt.allow_degenerate = *v;
  r.count("grid.cap");  // validated here, used by make_grid

  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.threads) opt.threads = *overrides.threads;
  if (overrides.out_dir) {
    cfg.out_dir = *overrides.out_dir;
  } else if (cfg.out_dir.empty()) {
    const char* env = std::getenv(kOutDirEnv);
    cfg.out_dir = (env && *env) ? std::filesystem::path(env) : std::filesystem::path("vrpg-out");
  }
  if (cfg.runs == 0) throw ArgumentError("experiment.runs must be at least 1");
  if (cfg.bucket_width == 0) throw ArgumentError("experiment.bucket_width must be at least 1");
  return cfg;
}

std::vector<GridPoint> make_grid(const ConfigFile& config, const Overrides& overrides) {
  const auto& grid_keys = grid_config_keys();
  std::vector<const ConfigFile::Entry*> axes;
  for (const auto& e : config.entries()) {
    if (e.values.size() > 1) {
      if (std::find(grid_keys.begin(), grid_keys.end(), e.key) == grid_keys.end() &&
          e.key != "policy.hidden") {
        throw ParseError(e.line, "'" + e.key + "' cannot be a grid axis");
      }
      if (e.key != "policy.hidden") axes.push_back(&e);
    }
  }
  std::size_t cap = 256;
  if (auto v = Reader(config).count("grid.cap")) cap = *v;
  std::size_t total = 1;
  for (const auto* axis : axes) {
    if (total > std::numeric_limits<std::size_t>::max() / axis->values.size()) {
      total = std::numeric_limits<std::size_t>::max();
      break;
    }
    total *= axis->values.size();
  }
  if (total > cap) {
    throw ArgumentError("grid has " + std::to_string(total) + " points, above grid.cap = " +
                        std::to_string(cap));
  }

  std::vector<GridPoint> points;
  points.reserve(total);
  std::vector<std::size_t> index(axes.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    ConfigFile point = config;
    GridPoint gp;
    for (std::size_t k = 0; k < axes.size(); ++k) {
      const std::string& value = axes[k]->values[index[k]];
      point.set(axes[k]->key, value);
      gp.assignment.emplace_back(axes[k]->key, value);
    }
    gp.config = make_run_config(point, overrides);
    points.push_back(std::move(gp));
    // Odometer increment: the last axis varies fastest.
    for (std::size_t k = axes.size(); k-- > 0;) {
      if (++index[k] < axes[k]->values.size()) break;
      index[k] = 0;
    }
  }
  return points;
}

}  // namespace vrpg
