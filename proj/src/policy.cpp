#include "vrpg/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace vrpg {

namespace {

double log_sum_exp(std::span<const double> z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - zmax);
  return zmax + std::log(s);
}

constexpr char kParamMagic[8] = {'V', 'R', 'P', 'G', 'T', 'H', 'T', '1'};

}  // namespace

// ---------------------------------------------------------------------------
// Policy

void Policy::check_params(const ParamVector& theta) const {
  if (static_cast<std::size_t>(theta.size()) != param_dim()) {
    throw ConfigError("parameter vector has dimension " + std::to_string(theta.size()) +
                      ", policy '" + kind() + "' expects " + std::to_string(param_dim()));
  }
  if (!theta.allFinite()) throw NumericError("parameter vector has non-finite entries");
}

void Policy::check_action(int action) const {
  if (action < 0 || action >= action_count()) {
    throw ArgumentError("action " + std::to_string(action) + " out of range [0, " +
                        std::to_string(action_count()) + ")");
  }
}

void Policy::action_distribution(const ParamVector& theta, std::span<const double> state,
                                 std::span<double> out) const {
  logits(theta, state, out);
  const double zmax = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v - zmax);
    total += v;
  }
  for (double& v : out) v /= total;
}

std::vector<double> Policy::action_distribution(const ParamVector& theta,
                                                std::span<const double> state) const {
  check_params(theta);
  std::vector<double> out(static_cast<std::size_t>(action_count()));
  action_distribution(theta, state, out);
  return out;
}

double Policy::log_prob(const ParamVector& theta, std::span<const double> state,
                        int action) const {
  check_params(theta);
  check_action(action);
  std::vector<double> z(static_cast<std::size_t>(action_count()));
  logits(theta, state, z);
  return z[static_cast<std::size_t>(action)] - log_sum_exp(z);
}

ParamVector Policy::grad_log_prob(const ParamVector& theta, std::span<const double> state,
                                  int action) const {
  check_params(theta);
  check_action(action);
  ParamVector g = ParamVector::Zero(static_cast<Eigen::Index>(param_dim()));
  accumulate_score(theta, state, action, 1.0, g);
  return g;
}

// ---------------------------------------------------------------------------
// TabularSoftmaxPolicy

TabularSoftmaxPolicy::TabularSoftmaxPolicy(int state_count, int action_count)
    : state_count_(state_count), action_count_(action_count) {
  if (state_count < 1 || action_count < 1) {
    throw ArgumentError("tabular policy needs at least one state and one action");
  }
}

std::size_t TabularSoftmaxPolicy::param_dim() const {
  return static_cast<std::size_t>(state_count_) * static_cast<std::size_t>(action_count_);
}

int TabularSoftmaxPolicy::state_index(std::span<const double> state) const {
  if (state.empty()) throw ArgumentError("tabular policy: empty state");
  const double raw = state[0];
  const int s = static_cast<int>(raw);
  if (raw != static_cast<double>(s) || s < 0 || s >= state_count_) {
    throw ArgumentError("tabular policy: invalid state index " + std::to_string(raw));
  }
  return s;
}

void TabularSoftmaxPolicy::logits(const ParamVector& theta, std::span<const double> state,
                                  std::span<double> out) const {
  const std::size_t base = static_cast<std::size_t>(state_index(state)) * action_count_;
  for (int a = 0; a < action_count_; ++a) out[a] = theta[static_cast<Eigen::Index>(base + a)];
}

void TabularSoftmaxPolicy::accumulate_score(const ParamVector& theta,
                                            std::span<const double> state, int action,
                                            double scale, ParamVector& accum) const {
  const std::size_t base = static_cast<std::size_t>(state_index(state)) * action_count_;
  std::vector<double> probs(static_cast<std::size_t>(action_count_));
  action_distribution(theta, state, probs);
  for (int a = 0; a < action_count_; ++a) {
    const double indicator = (a == action) ? 1.0 : 0.0;
    accum[static_cast<Eigen::Index>(base + a)] += scale * (indicator - probs[a]);
  }
}

ParamVector TabularSoftmaxPolicy::initial_params(Rng&) const {
  return ParamVector::Zero(static_cast<Eigen::Index>(param_dim()));
}

std::unique_ptr<Policy> TabularSoftmaxPolicy::clone() const {
  return std::make_unique<TabularSoftmaxPolicy>(*this);
}

// ---------------------------------------------------------------------------
// MlpSoftmaxPolicy

MlpSoftmaxPolicy::MlpSoftmaxPolicy(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw ArgumentError("MLP policy needs input and output widths");
  for (int w : widths_) {
    if (w < 1) throw ArgumentError("MLP layer widths must be positive");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(offset);
    const auto in = static_cast<std::size_t>(widths_[l]);
    const auto out = static_cast<std::size_t>(widths_[l + 1]);
    offset += out * in + out;
  }
  param_dim_ = offset;
}

void MlpSoftmaxPolicy::logits(const ParamVector& theta, std::span<const double> state,
                              std::span<double> out) const {
  using Eigen::Index;
  const std::size_t layers = widths_.size() - 1;
  Eigen::VectorXd act = Eigen::Map<const Eigen::VectorXd>(state.data(), widths_.front());
  for (std::size_t l = 0; l < layers; ++l) {
    const Index in = widths_[l];
    const Index outw = widths_[l + 1];
    const double* base = theta.data() + offsets_[l];
    Eigen::Map<const Eigen::MatrixXd> w(base, outw, in);
    Eigen::Map<const Eigen::VectorXd> b(base + outw * in, outw);
    Eigen::VectorXd z = w * act + b;
    if (l + 1 < layers) {
      act = z.array().tanh().matrix();
    } else {
      std::copy(z.data(), z.data() + outw, out.begin());
    }
  }
}

void MlpSoftmaxPolicy::accumulate_score(const ParamVector& theta, std::span<const double> state,
                                        int action, double scale, ParamVector& accum) const {
  using Eigen::Index;
  const std::size_t layers = widths_.size() - 1;

  // Forward pass, keeping every layer input.
  std::vector<Eigen::VectorXd> inputs(layers);
  inputs[0] = Eigen::Map<const Eigen::VectorXd>(state.data(), widths_.front());
  Eigen::VectorXd z;
  for (std::size_t l = 0; l < layers; ++l) {
    const Index in = widths_[l];
    const Index outw = widths_[l + 1];
    const double* base = theta.data() + offsets_[l];
    Eigen::Map<const Eigen::MatrixXd> w(base, outw, in);
    Eigen::Map<const Eigen::VectorXd> b(base + outw * in, outw);
    z = w * inputs[l] + b;
    if (l + 1 < layers) inputs[l + 1] = z.array().tanh().matrix();
  }

  // d log softmax(z)_a / dz = e_a - softmax(z)
  const double zmax = z.maxCoeff();
  Eigen::VectorXd delta = (z.array() - zmax).exp().matrix();
  delta /= delta.sum();
  delta = -scale * delta;
  delta[action] += scale;

  for (std::size_t l = layers; l-- > 0;) {
    const Index in = widths_[l];
    const Index outw = widths_[l + 1];
    double* gbase = accum.data() + offsets_[l];
    Eigen::Map<Eigen::MatrixXd> gw(gbase, outw, in);
    Eigen::Map<Eigen::VectorXd> gb(gbase + outw * in, outw);
    gw.noalias() += delta * inputs[l].transpose();
    gb += delta;
    if (l > 0) {
      Eigen::Map<const Eigen::MatrixXd> w(theta.data() + offsets_[l], outw, in);
      Eigen::VectorXd back = w.transpose() * delta;
      delta = back.array() * (1.0 - inputs[l].array().square());
    }
  }
}

ParamVector MlpSoftmaxPolicy::initial_params(Rng& rng) const {
  ParamVector theta = ParamVector::Zero(static_cast<Eigen::Index>(param_dim_));
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const auto in = static_cast<std::size_t>(widths_[l]);
    const auto out = static_cast<std::size_t>(widths_[l + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t k = 0; k < out * in; ++k) {
      theta[static_cast<Eigen::Index>(offsets_[l] + k)] = rng.uniform(-bound, bound);
    }
  }
  return theta;
}

std::unique_ptr<Policy> MlpSoftmaxPolicy::clone() const {
  return std::make_unique<MlpSoftmaxPolicy>(*this);
}

std::unique_ptr<MlpSoftmaxPolicy> make_benchmark_mlp(int state_dim, int action_count) {
  return std::make_unique<MlpSoftmaxPolicy>(std::vector<int>{state_dim, 32, 32, action_count});
}

// ---------------------------------------------------------------------------
// Snapshots

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void write_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw ValidationError("parameter file truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void save_params(const std::filesystem::path& path, const ParamVector& theta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out.write(kParamMagic, sizeof(kParamMagic));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(theta.size()));
  for (Eigen::Index i = 0; i < theta.size(); ++i) write_le<double>(out, theta[i]);
  if (!out) throw ConfigError("failed writing " + path.string());
}

ParamVector load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[sizeof(kParamMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kParamMagic, sizeof(magic)) != 0) {
    throw ValidationError(path.string() + ": not a parameter snapshot (bad magic)");
  }
  const auto d = read_le<std::uint64_t>(in);
  ParamVector theta(static_cast<Eigen::Index>(d));
  for (std::uint64_t i = 0; i < d; ++i) theta[static_cast<Eigen::Index>(i)] = read_le<double>(in);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ValidationError(path.string() + ": trailing bytes after " + std::to_string(d) +
                          " parameters");
  }
  return theta;
}

}  // namespace vrpg
