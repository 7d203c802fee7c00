#include "vrpg/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>

namespace vrpg {

namespace {

void check_action(int action, int count, const char* env) {
  if (action < 0 || action >= count) {
    throw ArgumentError(std::string(env) + ": action " + std::to_string(action) +
                        " out of range [0, " + std::to_string(count) + ")");
  }
}

double wrap_angle(double x) {
  constexpr double pi = std::numbers::pi;
  constexpr double two_pi = 2.0 * pi;
  while (x > pi) x -= two_pi;
  while (x < -pi) x += two_pi;
  return x;
}

}  // namespace

// ---------------------------------------------------------------------------
// CartPole

std::unique_ptr<Environment> CartPoleEnv::clone() const {
  return std::make_unique<CartPoleEnv>(*this);
}

void CartPoleEnv::reset(Rng& rng, std::span<double> obs) {
  for (double& x : state_) x = rng.uniform(-kInitNoise, kInitNoise);
  steps_ = 0;
  std::copy(state_.begin(), state_.end(), obs.begin());
}

void CartPoleEnv::set_state(const State& s) {
  state_ = s;
  steps_ = 0;
}

CartPoleEnv::State CartPoleEnv::integrate(const State& s, int action) {
  check_action(action, 2, "cartpole");
  constexpr double total_mass = kCartMass + kPoleMass;
  constexpr double polemass_length = kPoleMass * kHalfLength;
  const auto [x, x_dot, phi, phi_dot] = s;
  const double force = (action == 1) ? kForceMag : -kForceMag;
  const double cos_phi = std::cos(phi);
  const double sin_phi = std::sin(phi);
  const double temp = (force + polemass_length * phi_dot * phi_dot * sin_phi) / total_mass;
  const double phi_acc = (kGravity * sin_phi - cos_phi * temp) /
                         (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_phi * cos_phi / total_mass));
  const double x_acc = temp - polemass_length * phi_acc * cos_phi / total_mass;
  return {x + kTau * x_dot, x_dot + kTau * x_acc, phi + kTau * phi_dot, phi_dot + kTau * phi_acc};
}

bool CartPoleEnv::out_of_bounds(const State& s) {
  constexpr double angle_limit = kAngleLimitDeg * std::numbers::pi / 180.0;
  return std::abs(s[2]) > angle_limit || std::abs(s[0]) > kPositionLimit;
}

StepResult CartPoleEnv::step(int action, Rng&, std::span<double> obs) {
  state_ = integrate(state_, action);
  ++steps_;
  std::copy(state_.begin(), state_.end(), obs.begin());
  return {1.0, out_of_bounds(state_) || steps_ >= kMaxSteps};
}

// ---------------------------------------------------------------------------
// Acrobot

std::unique_ptr<Environment> AcrobotEnv::clone() const {
  return std::make_unique<AcrobotEnv>(*this);
}

void AcrobotEnv::observe(std::span<double> obs) const {
  const auto [t1, t2, d1, d2] = state_;
  obs[0] = std::cos(t1);
  obs[1] = std::sin(t1);
  obs[2] = std::cos(t2);
  obs[3] = std::sin(t2);
  obs[4] = d1;
  obs[5] = d2;
}

void AcrobotEnv::reset(Rng& rng, std::span<double> obs) {
  for (double& x : state_) x = rng.uniform(-kInitNoise, kInitNoise);
  steps_ = 0;
  observe(obs);
}

void AcrobotEnv::set_state(const State& s) {
  state_ = s;
  steps_ = 0;
}

AcrobotEnv::State AcrobotEnv::derivatives(const State& s, double torque) {
  constexpr double m1 = kLinkMass1, m2 = kLinkMass2;
  constexpr double l1 = kLinkLength1, lc1 = kLinkCom1, lc2 = kLinkCom2;
  constexpr double i1 = kLinkMoi, i2 = kLinkMoi;
  constexpr double g = kGravity;
  constexpr double half_pi = std::numbers::pi / 2.0;
  const auto [t1, t2, dt1, dt2] = s;

  const double d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * std::cos(t2)) +
                    i1 + i2;
  const double d2 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(t2)) + i2;
  const double phi2 = m2 * lc2 * g * std::cos(t1 + t2 - half_pi);
  const double phi1 = -m2 * l1 * lc2 * dt2 * dt2 * std::sin(t2) -
                      2.0 * m2 * l1 * lc2 * dt2 * dt1 * std::sin(t2) +
                      (m1 * lc1 + m2 * l1) * g * std::cos(t1 - half_pi) + phi2;
  const double ddt2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dt1 * dt1 * std::sin(t2) - phi2) /
                      (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
  const double ddt1 = -(d2 * ddt2 + phi1) / d1;
  return {dt1, dt2, ddt1, ddt2};
}

AcrobotEnv::State AcrobotEnv::integrate(const State& s, double torque) {
  auto axpy = [](const State& x, double a, const State& k) {
    State r;
    for (std::size_t i = 0; i < 4; ++i) r[i] = x[i] + a * k[i];
    return r;
  };
  constexpr double dt = kDt;
  const State k1 = derivatives(s, torque);
  const State k2 = derivatives(axpy(s, dt / 2.0, k1), torque);
  const State k3 = derivatives(axpy(s, dt / 2.0, k2), torque);
  const State k4 = derivatives(axpy(s, dt, k3), torque);
  State next;
  for (std::size_t i = 0; i < 4; ++i) {
    next[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  next[0] = wrap_angle(next[0]);
  next[1] = wrap_angle(next[1]);
  next[2] = std::clamp(next[2], -kMaxVel1, kMaxVel1);
  next[3] = std::clamp(next[3], -kMaxVel2, kMaxVel2);
  return next;
}

bool AcrobotEnv::goal_reached(const State& s) {
  return -std::cos(s[0]) - std::cos(s[1] + s[0]) > 1.0;
}

double AcrobotEnv::energy(const State& s) {
  constexpr double m1 = kLinkMass1, m2 = kLinkMass2;
  constexpr double l1 = kLinkLength1, lc1 = kLinkCom1, lc2 = kLinkCom2;
  constexpr double i1 = kLinkMoi, i2 = kLinkMoi;
  const auto [t1, t2, dt1, dt2] = s;
  // Mass matrix of the equations of motion above.
  const double m11 =
      m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * std::cos(t2)) + i1 + i2;
  const double m12 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(t2)) + i2;
  const double m22 = m2 * lc2 * lc2 + i2;
  const double kinetic = 0.5 * (m11 * dt1 * dt1 + 2.0 * m12 * dt1 * dt2 + m22 * dt2 * dt2);
  const double potential =
      -(m1 * lc1 + m2 * l1) * kGravity * std::cos(t1) - m2 * lc2 * kGravity * std::cos(t1 + t2);
  return kinetic + potential;
}

StepResult AcrobotEnv::step(int action, Rng&, std::span<double> obs) {
  check_action(action, 3, "acrobot");
  state_ = integrate(state_, kTorques[static_cast<std::size_t>(action)]);
  ++steps_;
  observe(obs);
  const bool goal = goal_reached(state_);
  return {goal ? 0.0 : -1.0, goal || steps_ >= kMaxSteps};
}

// ---------------------------------------------------------------------------
// Tabular

void TabularMdpSpec::validate() const {
  if (state_count < 1 || action_count < 1) {
    throw ValidationError("tabular MDP needs at least one state and one action");
  }
  if (horizon < 1) throw ValidationError("tabular MDP horizon must be at least 1");
  const auto ns = static_cast<std::size_t>(state_count);
  const auto na = static_cast<std::size_t>(action_count);
  if (initial.size() != ns) throw ValidationError("initial distribution has wrong length");
  if (rewards.size() != ns * na) throw ValidationError("reward table has wrong size");
  if (transitions.size() != ns * na * ns) throw ValidationError("transition table has wrong size");

  auto check_distribution = [](std::span<const double> p, const std::string& what) {
    double total = 0.0;
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(what + " has a negative entry");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      std::ostringstream msg;
      msg.precision(17);
      msg << what << " sums to " << total << ", not 1";
      throw ValidationError(msg.str());
    }
  };
  check_distribution(initial, "initial distribution");
  for (int s = 0; s < state_count; ++s) {
    for (int a = 0; a < action_count; ++a) {
      check_distribution(next_state_probs(s, a),
                         "P[" + std::to_string(s) + "][" + std::to_string(a) + "]");
      const double r = reward(s, a);
      if (!std::isfinite(r) || std::abs(r) > reward_bound) {
        throw ValidationError("reward r[" + std::to_string(s) + "][" + std::to_string(a) +
                              "] exceeds the declared bound " + std::to_string(reward_bound));
      }
    }
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_numbers(const std::string& text, int line) {
  std::istringstream in(text);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParseError(line, "expected a number, got '" + tok + "'");
    }
  }
  return out;
}

int parse_count(const std::string& text, int line, const std::string& key) {
  const auto v = parse_numbers(text, line);
  if (v.size() != 1 || v[0] != std::floor(v[0]) || v[0] < 1) {
    throw ParseError(line, key + " must be a positive integer");
  }
  return static_cast<int>(v[0]);
}

}  // namespace

TabularMdpSpec parse_tabular_mdp(std::istream& in) {
  TabularMdpSpec spec;
  std::optional<double> bound;
  std::vector<std::pair<int, std::vector<double>>> reward_rows;
  std::vector<std::pair<int, std::string>> transition_rows;
  std::string section;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string text = trim(raw.substr(0, raw.find('#')));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ParseError(line, "unterminated section header");
      section = trim(text.substr(1, text.size() - 2));
      if (section != "rewards" && section != "transitions") {
        throw ParseError(line, "unknown section [" + section + "]");
      }
      continue;
    }
    if (section.empty()) {
      const auto eq = text.find('=');
      if (eq == std::string::npos) throw ParseError(line, "expected 'key = value'");
      const std::string key = trim(text.substr(0, eq));
      const std::string value = trim(text.substr(eq + 1));
      if (key == "states") {
        spec.state_count = parse_count(value, line, key);
      } else if (key == "actions") {
        spec.action_count = parse_count(value, line, key);
      } else if (key == "horizon") {
        spec.horizon = parse_count(value, line, key);
      } else if (key == "reward_bound") {
        const auto v = parse_numbers(value, line);
        if (v.size() != 1 || !(v[0] > 0)) throw ParseError(line, "reward_bound must be positive");
        bound = v[0];
      } else if (key == "initial") {
        spec.initial = parse_numbers(value, line);
      } else {
        throw ParseError(line, "unknown key '" + key + "'");
      }
    } else if (section == "rewards") {
      reward_rows.emplace_back(line, parse_numbers(text, line));
    } else {
      transition_rows.emplace_back(line, text);
    }
  }

  if (spec.state_count < 1 || spec.action_count < 1 || spec.horizon < 1) {
    throw ParseError(line, "missing one of: states, actions, horizon");
  }
  const auto ns = static_cast<std::size_t>(spec.state_count);
  const auto na = static_cast<std::size_t>(spec.action_count);
  if (spec.initial.size() != ns) {
    throw ParseError(line, "initial distribution must have " + std::to_string(ns) + " entries");
  }
  if (reward_rows.size() != ns) {
    throw ParseError(line, "[rewards] must have one row per state (" + std::to_string(ns) + ")");
  }
  for (const auto& [row_line, row] : reward_rows) {
    if (row.size() != na) {
      throw ParseError(row_line, "reward row must have " + std::to_string(na) + " entries");
    }
    spec.rewards.insert(spec.rewards.end(), row.begin(), row.end());
  }

  spec.transitions.assign(ns * na * ns, 0.0);
  std::vector<bool> seen(ns * na, false);
  for (const auto& [row_line, text] : transition_rows) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ParseError(row_line, "expected 's a : p_0 ... p_n'");
    const auto head = parse_numbers(text.substr(0, colon), row_line);
    const auto probs = parse_numbers(text.substr(colon + 1), row_line);
    if (head.size() != 2) throw ParseError(row_line, "expected state and action before ':'");
    const int s = static_cast<int>(head[0]);
    const int a = static_cast<int>(head[1]);
    if (s < 0 || s >= spec.state_count || a < 0 || a >= spec.action_count ||
        head[0] != s || head[1] != a) {
      throw ParseError(row_line, "state/action index out of range");
    }
    if (probs.size() != ns) {
      throw ParseError(row_line, "transition row must have " + std::to_string(ns) + " entries");
    }
    const std::size_t idx = static_cast<std::size_t>(s) * na + static_cast<std::size_t>(a);
    if (seen[idx]) throw ParseError(row_line, "duplicate transition row");
    seen[idx] = true;
    std::copy(probs.begin(), probs.end(), spec.transitions.begin() + idx * ns);
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw ParseError(line, "[transitions] must define every (state, action) pair");
  }

  double max_abs = 0.0;
  for (double r : spec.rewards) max_abs = std::max(max_abs, std::abs(r));
  spec.reward_bound = bound.value_or(max_abs > 0.0 ? max_abs : 1.0);
  spec.validate();
  return spec;
}

TabularMdpSpec load_tabular_mdp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open MDP file " + path.string());
  return parse_tabular_mdp(in);
}

std::string format_tabular_mdp(const TabularMdpSpec& spec) {
  std::ostringstream out;
  out.precision(17);
  out << "states = " << spec.state_count << "\nactions = " << spec.action_count
      << "\nhorizon = " << spec.horizon << "\nreward_bound = " << spec.reward_bound
      << "\ninitial =";
  for (double p : spec.initial) out << ' ' << p;
  out << "\n[rewards]\n";
  for (int s = 0; s < spec.state_count; ++s) {
    for (int a = 0; a < spec.action_count; ++a) out << (a ? " " : "") << spec.reward(s, a);
    out << '\n';
  }
  out << "[transitions]\n";
  for (int s = 0; s < spec.state_count; ++s) {
    for (int a = 0; a < spec.action_count; ++a) {
      out << s << ' ' << a << " :";
      for (double p : spec.next_state_probs(s, a)) out << ' ' << p;
      out << '\n';
    }
  }
  return out.str();
}

TabularStep tabular_step(const TabularMdpSpec& spec, int state, int action, int steps_taken,
                         Rng& rng) {
  if (state < 0 || state >= spec.state_count) {
    throw ArgumentError("tabular: state " + std::to_string(state) + " out of range");
  }
  check_action(action, spec.action_count, "tabular");
  const int next = sample_index(spec.next_state_probs(state, action), rng.uniform());
  return {next, spec.reward(state, action), steps_taken + 1 >= spec.horizon};
}

TabularEnv::TabularEnv(TabularMdpSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

std::unique_ptr<Environment> TabularEnv::clone() const {
  return std::make_unique<TabularEnv>(*this);
}

void TabularEnv::reset(Rng& rng, std::span<double> obs) {
  state_ = sample_index(spec_.initial, rng.uniform());
  steps_ = 0;
  obs[0] = state_;
}

void TabularEnv::set_state(int s) {
  if (s < 0 || s >= spec_.state_count) throw ArgumentError("tabular: state out of range");
  state_ = s;
  steps_ = 0;
}

StepResult TabularEnv::step(int action, Rng& rng, std::span<double> obs) {
  const TabularStep res = tabular_step(spec_, state_, action, steps_, rng);
  state_ = res.next_state;
  ++steps_;
  obs[0] = state_;
  return {res.reward, res.terminal};
}

std::unique_ptr<Environment> make_environment(const std::string& name) {
  if (name == "cartpole") return std::make_unique<CartPoleEnv>();
  if (name == "acrobot") return std::make_unique<AcrobotEnv>();
  if (std::filesystem::exists(name)) return std::make_unique<TabularEnv>(load_tabular_mdp(name));
  throw ArgumentError("unknown environment '" + name +
                      "' (expected cartpole, acrobot, or a tabular MDP file)");
}

}  // namespace vrpg
