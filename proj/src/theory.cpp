#include "vrpg/theory.hpp"

#include "vrpg/common.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace vrpg {

TheoryConstants theory_constants(double G, double M, double R, double W, double gamma) {
  for (double x : {G, M, R, W}) {
    if (!std::isfinite(x) || x < 0.0) {
      throw ArgumentError("theory constants must be finite and non-negative");
    }
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw ArgumentError("gamma must lie in (0, 1)");
  TheoryConstants c;
  c.G = G;
  c.M = M;
  c.R = R;
  c.W = W;
  c.gamma = gamma;
  const double q = 1.0 - gamma;
  c.L = M * R / (q * q) + 2.0 * G * G * R / (q * q * q);
  c.C_g = G * R / (q * q);
  c.C_omega = 24.0 * R * G * G * (2.0 * G * G + M) * (W + 1.0) * gamma / std::pow(q, 5);
  c.C = 2.0 * (c.L * c.L + c.C_omega);
  return c;
}

std::string to_string(BindingBound b) {
  return b == BindingBound::kSwitch ? "switch" : "smoothness";
}

StepSizeCheck check_step_size(double eta, double p, double small_batch,
                              const TheoryConstants& constants) {
  if (!(p > 0.0 && p <= 1.0)) throw ArgumentError("p must lie in (0, 1]");
  if (!(small_batch >= 1.0)) throw ArgumentError("small batch must be at least 1");
  const double inf = std::numeric_limits<double>::infinity();
  StepSizeCheck out;
  out.eta_squared = eta * eta;
  out.switch_bound = p == 1.0 ? inf : p / (1.0 - p) * small_batch / (2.0 * constants.C);
  out.smoothness_bound = constants.L == 0.0 ? inf : 1.0 / (4.0 * constants.L * constants.L);
  out.binding = out.switch_bound <= out.smoothness_bound ? BindingBound::kSwitch
                                                         : BindingBound::kSmoothness;
  out.satisfied = out.eta_squared <= std::min(out.switch_bound, out.smoothness_bound);
  return out;
}

HyperparamRecommendation recommended_hyperparams(const TheoryConstants& constants,
                                                 std::size_t small_batch,
                                                 std::size_t large_batch) {
  if (small_batch < 1 || small_batch > large_batch) {
    throw ArgumentError("recommendation needs 1 <= B <= N");
  }
  if (!(constants.C > 0.0)) throw ArgumentError("recommendation needs C > 0");
  HyperparamRecommendation r;
  const double B = static_cast<double>(small_batch);
  const double N = static_cast<double>(large_batch);
  r.eta = std::sqrt(B) / std::sqrt(2.0 * constants.C * N);
  r.p = 1.0 / N;
  r.check = check_step_size(r.eta, r.p, B, constants);
  return r;
}

namespace {

void line(std::ostringstream& out, const char* name, double v) {
  out << std::left << std::setw(10) << name << std::setprecision(10) << v << '\n';
}

}  // namespace

std::string format_constants(const TheoryConstants& c) {
  std::ostringstream out;
  line(out, "G", c.G);
  line(out, "M", c.M);
  line(out, "R", c.R);
  line(out, "W", c.W);
  line(out, "gamma", c.gamma);
  if (c.sigma) line(out, "sigma", *c.sigma);
  if (c.lambda) line(out, "lambda", *c.lambda);
  line(out, "L", c.L);
  line(out, "C_g", c.C_g);
  line(out, "C_omega", c.C_omega);
  line(out, "C", c.C);
  return out.str();
}

std::string format_recommendation(const HyperparamRecommendation& r) {
  std::ostringstream out;
  line(out, "eta", r.eta);
  line(out, "p", r.p);
  line(out, "eta^2", r.check.eta_squared);
  line(out, "switch", r.check.switch_bound);
  line(out, "smooth", r.check.smoothness_bound);
  out << std::left << std::setw(10) << "binding" << to_string(r.check.binding) << '\n';
  out << std::left << std::setw(10) << "satisfied" << (r.check.satisfied ? "yes" : "no") << '\n';
  return out.str();
}

}  // namespace vrpg
