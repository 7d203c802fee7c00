#pragma once

#include <cstddef>
#include <optional>
#include <string>

namespace vrpg {

/// Problem constants of the convergence analysis and the quantities derived
/// from them.
///
///   L       = M R / (1-g)^2 + 2 G^2 R / (1-g)^3     (smoothness)
///   C_g     = G R / (1-g)^2                          (estimator bound)
///   C_omega = 24 R G^2 (2 G^2 + M) (W + 1) g / (1-g)^5
///   C       = 2 (L^2 + C_omega)
struct TheoryConstants {
  double G = 0.0;  // bound on ||grad log pi||
  double M = 0.0;  // bound on ||hess log pi||
  double R = 0.0;  // reward bound
  double W = 0.0;  // importance-weight variance bound
  double gamma = 0.0;

  double L = 0.0;
  double C_g = 0.0;
  double C_omega = 0.0;
  double C = 0.0;

  // Reported only; nothing is derived from them.
  std::optional<double> sigma;
  std::optional<double> lambda;
};

/// Throws ArgumentError if gamma is outside (0, 1) or any input is negative
/// or non-finite.
TheoryConstants theory_constants(double G, double M, double R, double W, double gamma);

enum class BindingBound { kSwitch, kSmoothness };
std::string to_string(BindingBound b);

/// Step-size condition eta^2 <= min{ p/(1-p) * B/(2C), 1/(4 L^2) }.
struct StepSizeCheck {
  double eta_squared = 0.0;
  double switch_bound = 0.0;      // p/(1-p) * B/(2C); +inf when p = 1
  double smoothness_bound = 0.0;  // 1/(4 L^2); +inf when L = 0
  BindingBound binding = BindingBound::kSwitch;  // the smaller bound
  bool satisfied = false;
};

StepSizeCheck check_step_size(double eta, double p, double small_batch,
                              const TheoryConstants& constants);

/// eta = sqrt(B) / sqrt(2 C N), p = 1/N, plus the step-size check for that
/// pair.
struct HyperparamRecommendation {
  double eta = 0.0;
  double p = 0.0;
  StepSizeCheck check;
};

/// Requires 1 <= B <= N and C > 0; throws ArgumentError otherwise.
HyperparamRecommendation recommended_hyperparams(const TheoryConstants& constants,
                                                 std::size_t small_batch,
                                                 std::size_t large_batch);

/// Aligned multi-line text dump.
std::string format_constants(const TheoryConstants& c);
std::string format_recommendation(const HyperparamRecommendation& r);

}  // namespace vrpg
