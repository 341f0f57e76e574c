#pragma once

#include "lzd/model.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lzd {

enum class Method {
  Auto,           ///< Radau when decoherence dominates, otherwise Dormand-Prince
  DormandPrince,  ///< explicit 5(4) pair
  Radau,          ///< implicit Radau IIA, order 5
};

[[nodiscard]] std::string method_name(Method m);

struct SimConfig {
  double rtol = 1e-9;
  double atol = 1e-12;
  double window_factor = 40.0;  ///< K in T = K max(Δ₁/v, 1/√v, γ_d/v)
  long max_steps = 10'000'000;
  bool emit_trajectory = false;
  int trajectory_stride = 1;
  /// Dense-output sample times. When non-empty these replace the step-point
  /// trajectory. Times outside the integration window are ignored.
  std::vector<double> sample_times;
  /// Repeat the run on a window of twice the length to estimate the
  /// truncation error of x(+∞).
  bool window_doubling = true;
  /// Throw InstabilityError if N(t) increases across an accepted step.
  bool check_norm_monotone = false;
  Method method = Method::Auto;
  /// End of the evolution for non-linear profiles (required there).
  std::optional<double> t_end;
};

/// Throws InvalidInput when a field violates its range.
void validate(const SimConfig& config);

struct TrajectorySample {
  double t = 0.0;
  double x = 0.0;  ///< x, or X₁ for the full system
  double p_r = 0.0;  ///< p_r, or ρᵣ for the full system
  double p_i = 0.0;  ///< p_i, or ρᵢ for the full system
};

struct TransitionResult {
  /// Estimate of x(+∞) for a linear sweep started at t = -∞. For other
  /// profiles this is x at the end of the horizon and `asymptotic` is false.
  double x_inf = 0.0;
  double x_inf_uncertainty = 0.0;
  double x_end = 0.0;  ///< raw state component at t_window.second
  double initial_norm = 0.0;
  double final_norm = 0.0;
  long n_steps = 0;
  long n_rejected = 0;
  std::pair<double, double> t_window{0.0, 0.0};
  bool asymptotic = false;
  Method method = Method::DormandPrince;
  std::vector<TrajectorySample> trajectory;
};

/// Step budget exhausted; carries whatever had been computed.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, TransitionResult partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  [[nodiscard]] const TransitionResult& partial() const { return partial_; }

 private:
  TransitionResult partial_;
};

/// Symmetric window (-T, T) with T = K max(Δ₁/v, 1/√v, γ_d/v).
[[nodiscard]] std::pair<double, double> auto_window(const ModelParams& params, const LinearSweep& bias,
                                                    const SimConfig& config);

/// Adiabatic starting state of the reduced system at t0 (→ x = 1, p = 0 far
/// from the crossing).
[[nodiscard]] InitialCondition standard_initial_condition(const ModelParams& params,
                                                          const LinearSweep& bias, double t0);

/// Integrates the reduced system. With a linear sweep and no explicit initial
/// condition the run starts from the adiabatic state at -T and x_inf refers
/// to the ideal (-∞, +∞) problem.
[[nodiscard]] TransitionResult integrate(const ModelParams& params, const BiasProfile& bias,
                                         const std::optional<InitialCondition>& init,
                                         const SimConfig& config);

struct FullInitialCondition {
  FullState state;
  double t0 = 0.0;
};

/// Integrates the full system (raw coherences, complex gap, Γₑ). The
/// relaxation envelope is anchored at the start time. x_inf strips the
/// envelope so that it is directly comparable to integrate(); the trajectory
/// holds X₁ and the rotated coherences (ρᵣ, ρᵢ) including the envelope.
[[nodiscard]] TransitionResult integrate_full(const ModelParams& params, const BiasProfile& bias,
                                              const std::optional<FullInitialCondition>& init,
                                              const SimConfig& config);

}  // namespace lzd
