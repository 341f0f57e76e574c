#pragma once

// Far-from-crossing behaviour of the reduced system under a linear sweep.
//
// For |W| = |v t| large compared with Δ₁ and √v the coherences follow x
// adiabatically. Two second-order expansions in 1/(W² + γ_d²) are used:
//
//  * the slow manifold p_r = A(t) x, p_i = B(t) x, which gives a starting
//    state free of spurious coherence at a finite window edge;
//  * a left eigen-functional I = x + a(t) p_r + b(t) p_i with dI/dt = -λ(t) I
//    up to third-order terms. I tends to x as |t| grows, and removes the
//    undamped post-crossing oscillation that x itself still carries.
//
// Together they map a finite-window integration onto the ideal problem that
// starts at t = -∞ and ends at t = +∞.

#include "lzd/model.hpp"

#include <utility>

namespace lzd {

class SweepAsymptotics {
 public:
  SweepAsymptotics(double delta1, double v, double gamma_d);

  /// (A, B) such that (x, A x, B x) lies on the slow manifold at bias W.
  [[nodiscard]] std::pair<double, double> slow_manifold(double w) const;

  /// Coefficients (a, b) of the invariant functional at bias W.
  [[nodiscard]] std::pair<double, double> invariant_coefficients(double w) const;

  /// Decay rate λ of the invariant at bias W.
  [[nodiscard]] double decay_rate(double w) const;

  /// I(t) for a reduced state.
  [[nodiscard]] double invariant(double t, const Vec3& state) const;

  /// ∫ λ dt over (-∞, t] for t < 0, or over [t, +∞) for t > 0.
  [[nodiscard]] double outer_exponent(double t) const;

  /// ∫ λ dt over [t0, t1], both on the same side of the crossing.
  [[nodiscard]] double exponent_between(double t0, double t1) const;

  /// Slow-manifold state at time t scaled to pseudo-norm 1/4.
  [[nodiscard]] Vec3 adiabatic_state(double t) const;

  [[nodiscard]] double delta1() const { return delta1_; }
  [[nodiscard]] double v() const { return v_; }
  [[nodiscard]] double gamma_d() const { return gamma_; }

 private:
  double delta1_;
  double v_;
  double gamma_;
};

}  // namespace lzd
