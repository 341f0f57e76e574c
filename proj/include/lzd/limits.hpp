#pragma once

// Closed-form limits of x(+∞) and the third-order equation for x(t).

#include "lzd/integrator.hpp"
#include "lzd/model.hpp"

#include <span>
#include <string>
#include <vector>

namespace lzd {

enum class LimitKind {
  LandauZener,        ///< coherent: 2 exp(-π Δ₁² / 2v) - 1
  KayanumaPaper,      ///< exp(-π Δ₁² / 2v), the incoherent asymptote as printed (with Δ₁²)
  IncoherentDerived,  ///< exp(-π Δ₁² / v), adiabatic elimination integrated over all t
};

[[nodiscard]] std::string limit_name(LimitKind kind);
[[nodiscard]] double limit_xinf(LimitKind kind, double delta1, double v);

[[nodiscard]] double landau_zener_xinf(double delta1, double v);
[[nodiscard]] double kayanuma_paper_xinf(double delta1, double v);

/// exp[-(Δ₁²/v)(arctan(v t/γ_d) + π/2)]: the strong-decoherence trajectory
/// normalised to x(-∞) = 1.
[[nodiscard]] double incoherent_trajectory(double delta1, double v, double gamma_d, double t);

/// exp(-π Δ₁² / v), the t → +∞ value of incoherent_trajectory.
[[nodiscard]] double incoherent_xinf(double delta1, double v);

struct ResidualSample {
  double t = 0.0;
  double residual = 0.0;
  double scale = 0.0;  ///< |x'''| + sum of the absolute values of the other terms
  [[nodiscard]] double scaled() const { return scale > 0.0 ? std::abs(residual) / scale : 0.0; }
};

/// Residual of
///   x''' + (2γ - 1/t) x'' + (γ² + Δ₁² + v²t² - γ/t) x' + (γ - 1/t) Δ₁² x = 0
/// along sampled reduced states. x' and x'' come from the equations of motion
/// at each sample; x''' is a five-point finite difference of x'' over
/// neighbouring samples, so the residual measures how consistently the states
/// hang together in time. Samples with |t| <= t_excl or without two neighbours
/// on each side are skipped.
[[nodiscard]] std::vector<ResidualSample> third_order_residual(std::span<const TrajectorySample> samples,
                                                               const ModelParams& params, double v,
                                                               double t_excl = 1e-3);

/// Sample times on [t0, t1] spaced by eta / max(|v t|, Δ₁, γ_d, √v), suitable
/// for third_order_residual.
[[nodiscard]] std::vector<double> residual_grid(const ModelParams& params, double v, double t0,
                                                double t1, double eta = 0.02);

}  // namespace lzd
