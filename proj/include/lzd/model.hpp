#pragma once

// Two-level Landau-Zener dynamics with a phenomenological decoherence rate.
//
// Units are natural (hbar = 1). The reduced system evolves the population
// difference x together with the coherences (p_r, p_i) expressed in the frame
// where the tunneling gap is real:
//
//   dx/dt   =  2 Δ₁ p_i
//   dp_r/dt = -γ_d p_r - W₁(t) p_i
//   dp_i/dt = -γ_d p_i + W₁(t) p_r - (Δ₁/2) x
//
// The full system keeps the raw coherence ρ₁₁′ together with a complex gap and
// the canonical relaxation rate Γₑ; it reduces to the system above after a
// reflection of the coherence plane and the substitution X₁ = x e^{-Γₑ(t-t₀)}.

#include <Eigen/Dense>

#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace lzd {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct ModelParams {
  double delta1_r = 1.0;  ///< real part of the tunneling gap
  double delta1_i = 0.0;  ///< imaginary part of the tunneling gap
  double gamma_d = 0.0;   ///< effective decoherence rate
  double gamma_e = 0.0;   ///< canonical relaxation rate

  /// Gap magnitude |Δ₁|.
  [[nodiscard]] double delta1() const;
  /// Total coherence decay of the full system, γ₁₁′ = γ_d + Γₑ.
  [[nodiscard]] double gamma_11() const { return gamma_d + gamma_e; }
};

/// Throws InvalidInput unless every field is finite and both rates are >= 0.
void validate(const ModelParams& params);

// Energy bias profiles W₁(t).

struct LinearSweep {
  double v = 1.0;  ///< sweep velocity, W₁ = v t
};

struct PiecewiseLinear {
  /// (t, W₁) nodes with strictly increasing t; held constant outside.
  std::vector<std::pair<double, double>> nodes;
};

struct Sinusoidal {
  double amplitude = 1.0;
  double angular_frequency = 1.0;
  double phase = 0.0;
};

struct Tabulated {
  /// (t, W₁) samples with strictly increasing t; undefined outside the range.
  std::vector<std::pair<double, double>> samples;
};

using BiasProfile = std::variant<LinearSweep, PiecewiseLinear, Sinusoidal, Tabulated>;

/// Checks the ordering and finiteness invariants of a profile.
void validate(const BiasProfile& bias);

/// W₁(t). Throws InvalidProfile when a tabulated profile is queried outside
/// its sampled range.
[[nodiscard]] double bias_at(const BiasProfile& bias, double t);

[[nodiscard]] bool is_linear(const BiasProfile& bias);
[[nodiscard]] std::string profile_name(const BiasProfile& bias);

/// (x, p_r, p_i).
struct ReducedState {
  double x = 1.0;
  double p_r = 0.0;
  double p_i = 0.0;

  [[nodiscard]] Vec3 vec() const { return {x, p_r, p_i}; }
  static ReducedState from(const Vec3& v) { return {v[0], v[1], v[2]}; }
};

/// Population difference with the raw coherence ρ₁₁′ = rho_r + i rho_i.
struct FullState {
  double X1 = 1.0;
  double rho_r = 0.0;
  double rho_i = 0.0;

  [[nodiscard]] Vec3 vec() const { return {X1, rho_r, rho_i}; }
  static FullState from(const Vec3& v) { return {v[0], v[1], v[2]}; }
};

struct InitialCondition {
  ReducedState state;
  double t0 = 0.0;
};

/// N = (x/2)² + p_r² + p_i², non-increasing along exact trajectories.
[[nodiscard]] double pseudo_norm(const ReducedState& s);
[[nodiscard]] double pseudo_norm(const Vec3& s);

/// Right-hand side of the reduced system at time t.
[[nodiscard]] ReducedState derivative_reduced(const ReducedState& state, double t,
                                              const ModelParams& params,
                                              const BiasProfile& bias);

/// Right-hand side of the full system (raw coherences, complex gap, Γₑ).
[[nodiscard]] FullState derivative_full(const FullState& state, double t,
                                        const ModelParams& params,
                                        const BiasProfile& bias);

/// Both systems are linear, y' = A(t) y. These return A for a given bias value.
[[nodiscard]] Mat3 reduced_matrix(double delta1, double gamma_d, double w1);
[[nodiscard]] Mat3 full_matrix(const ModelParams& params, double w1);

/// Maps raw coherences (ρ₁₁′ᵣ, ρ₁₁′ᵢ) onto the frame with a real gap. The map
/// is a reflection, so it is its own inverse. Throws UndefinedRotation when
/// |Δ₁| = 0.
[[nodiscard]] std::pair<double, double> rotate_to_reduced(double rho_r_raw, double rho_i_raw,
                                                          const ModelParams& params);
[[nodiscard]] std::pair<double, double> rotate_to_raw(double rho_r, double rho_i,
                                                      const ModelParams& params);

struct TimeValue {
  double t;
  double value;
};

/// X₁(t) = x(t) e^{-Γₑ (t - t0)}. Identity when gamma_e = 0.
[[nodiscard]] std::vector<TimeValue> apply_relaxation_envelope(std::span<const TimeValue> trajectory,
                                                               double gamma_e, double t0);

}  // namespace lzd
