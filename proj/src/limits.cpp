#include "lzd/limits.hpp"

#include "lzd/errors.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace lzd {

namespace {

void require_sweep(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("sweep velocity must be > 0");
}

// Fornberg's recursion for first-derivative weights at z on arbitrary nodes.
template <std::size_t N>
std::array<double, N> first_derivative_weights(double z, const std::array<double, N>& x) {
  std::array<std::array<double, 2>, N> c{};
  double c1 = 1.0;
  double c4 = x[0] - z;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < N; ++i) {
    const std::size_t mn = std::min<std::size_t>(i, 1);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (std::size_t k = mn; k >= 1; --k) {
          c[i][k] = c1 * (static_cast<double>(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        }
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (std::size_t k = mn; k >= 1; --k) {
        c[j][k] = (c4 * c[j][k] - static_cast<double>(k) * c[j][k - 1]) / c3;
      }
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::array<double, N> w{};
  for (std::size_t i = 0; i < N; ++i) w[i] = c[i][1];
  return w;
}

}  // namespace

std::string limit_name(LimitKind kind) {
  switch (kind) {
    case LimitKind::LandauZener: return "landau_zener";
    case LimitKind::KayanumaPaper: return "kayanuma_paper";
    case LimitKind::IncoherentDerived: return "incoherent_derived";
  }
  return "unknown";
}

double limit_xinf(LimitKind kind, double delta1, double v) {
  switch (kind) {
    case LimitKind::LandauZener: return landau_zener_xinf(delta1, v);
    case LimitKind::KayanumaPaper: return kayanuma_paper_xinf(delta1, v);
    case LimitKind::IncoherentDerived: return incoherent_xinf(delta1, v);
  }
  throw DomainError("unknown limit kind");
}

double landau_zener_xinf(double delta1, double v) {
  require_sweep(v);
  return 2.0 * std::exp(-std::numbers::pi * delta1 * delta1 / (2.0 * v)) - 1.0;
}

double kayanuma_paper_xinf(double delta1, double v) {
  require_sweep(v);
  return std::exp(-std::numbers::pi * delta1 * delta1 / (2.0 * v));
}

double incoherent_trajectory(double delta1, double v, double gamma_d, double t) {
  require_sweep(v);
  if (!(gamma_d > 0.0)) throw DomainError("incoherent trajectory requires gamma_d > 0");
  if (std::isinf(t)) return t < 0.0 ? 1.0 : incoherent_xinf(delta1, v);
  // arctan(vt/γ) + π/2 without cancellation for large negative t.
  const double s = v * t / gamma_d;
  const double angle = s < 0.0 ? std::atan(-1.0 / s) : std::atan(s) + 0.5 * std::numbers::pi;
  return std::exp(-delta1 * delta1 / v * angle);
}

double incoherent_xinf(double delta1, double v) {
  require_sweep(v);
  return std::exp(-std::numbers::pi * delta1 * delta1 / v);
}

std::vector<ResidualSample> third_order_residual(std::span<const TrajectorySample> samples,
                                                 const ModelParams& params, double v,
                                                 double t_excl) {
  const double d = params.delta1();
  const double g = params.gamma_d;
  const double d2 = d * d;

  std::vector<double> second(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    second[k] = 2.0 * d * (-g * s.p_i + v * s.t * s.p_r - 0.5 * d * s.x);
  }

  std::vector<ResidualSample> out;
  if (samples.size() < 5) return out;
  for (std::size_t k = 2; k + 2 < samples.size(); ++k) {
    const auto& s = samples[k];
    const double t = s.t;
    if (std::abs(t) <= t_excl) continue;
    const std::array<double, 5> nodes{samples[k - 2].t, samples[k - 1].t, t, samples[k + 1].t,
                                      samples[k + 2].t};
    const auto w = first_derivative_weights(t, nodes);
    double third = 0.0;
    for (std::size_t j = 0; j < 5; ++j) third += w[j] * second[k - 2 + j];

    const double first = 2.0 * d * s.p_i;
    const std::array<double, 4> terms{
        third,
        (2.0 * g - 1.0 / t) * second[k],
        (g * g + d2 + v * v * t * t - g / t) * first,
        (g - 1.0 / t) * d2 * s.x,
    };
    ResidualSample r{t, 0.0, 0.0};
    for (double term : terms) {
      r.residual += term;
      r.scale += std::abs(term);
    }
    out.push_back(r);
  }
  return out;
}

std::vector<double> residual_grid(const ModelParams& params, double v, double t0, double t1,
                                  double eta) {
  if (!(t1 > t0) || !(eta > 0.0)) throw InvalidInput("residual grid needs t1 > t0 and eta > 0");
  const double floor_rate = std::max({params.delta1(), params.gamma_d, std::sqrt(v)});
  std::vector<double> grid;
  for (double t = t0; t < t1;) {
    grid.push_back(t);
    t += eta / std::max(std::abs(v * t), floor_rate);
  }
  grid.push_back(t1);
  return grid;
}

}  // namespace lzd
