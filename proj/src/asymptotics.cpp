#include "lzd/asymptotics.hpp"

#include "lzd/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <numbers>

namespace lzd {

SweepAsymptotics::SweepAsymptotics(double delta1, double v, double gamma_d)
    : delta1_(delta1), v_(v), gamma_(gamma_d) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidProfile("linear sweep requires v > 0");
  if (!(delta1 >= 0.0) || !(gamma_d >= 0.0)) throw InvalidInput("delta1 and gamma_d must be >= 0");
}

std::pair<double, double> SweepAsymptotics::slow_manifold(double w) const {
  const double d = delta1_;
  const double g = gamma_;
  const double den = w * w + g * g;
  double a = d * w / (2.0 * den);
  double b = -d * g / (2.0 * den);
  // Derivatives of the first-order terms; dW/dt = v.
  const double da = d * v_ * (g * g - w * w) / (2.0 * den * den);
  const double db = d * g * w * v_ / (den * den);
  for (int iter = 0; iter < 3; ++iter) {
    const double r1 = da + 2.0 * d * a * b;
    const double r2 = db + 2.0 * d * b * b + 0.5 * d;
    const double a_next = (-g * r1 + w * r2) / den;
    const double b_next = (-w * r1 - g * r2) / den;
    a = a_next;
    b = b_next;
  }
  return {a, b};
}

std::pair<double, double> SweepAsymptotics::invariant_coefficients(double w) const {
  const double d = delta1_;
  const double g = gamma_;
  const double den = w * w + g * g;
  const double a1 = 2.0 * d * w / den;
  const double b1 = 2.0 * d * g / den;
  const double da1 = 2.0 * d * v_ * (g * g - w * w) / (den * den);
  const double db1 = -4.0 * d * g * w * v_ / (den * den);
  const double r1 = -da1 - 0.5 * a1 * b1 * d;
  const double r2 = -2.0 * d - db1 - 0.5 * b1 * b1 * d;
  return {(-g * r1 - w * r2) / den, (w * r1 - g * r2) / den};
}

double SweepAsymptotics::decay_rate(double w) const {
  return 0.5 * delta1_ * invariant_coefficients(w).second;
}

double SweepAsymptotics::invariant(double t, const Vec3& state) const {
  const auto [a, b] = invariant_coefficients(v_ * t);
  return state[0] + a * state[1] + b * state[2];
}

double SweepAsymptotics::outer_exponent(double t) const {
  if (delta1_ == 0.0) return 0.0;
  const double w0 = std::abs(v_ * t);
  if (!(w0 > 0.0)) throw DomainError("outer exponent requires t != 0");
  const double sign = t > 0.0 ? 1.0 : -1.0;
  const double d2 = delta1_ * delta1_;
  // Leading Lorentzian part in closed form, the remainder by quadrature.
  const double leading = gamma_ > 0.0 ? d2 / v_ * std::atan(gamma_ / w0) : 0.0;
  auto remainder = [&](double u) {
    const double w = sign * u;
    return decay_rate(w) - d2 * gamma_ / (w * w + gamma_ * gamma_);
  };
  const double rest = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      remainder, w0, std::numeric_limits<double>::infinity(), 15, 1e-12);
  return leading + rest / v_;
}

double SweepAsymptotics::exponent_between(double t0, double t1) const {
  if (delta1_ == 0.0 || t0 == t1) return 0.0;
  auto rate = [&](double t) { return decay_rate(v_ * t); };
  return boost::math::quadrature::gauss<double, 20>::integrate(rate, t0, t1);
}

Vec3 SweepAsymptotics::adiabatic_state(double t) const {
  const auto [a, b] = slow_manifold(v_ * t);
  const double x0 = 1.0 / std::sqrt(1.0 + 4.0 * (a * a + b * b));
  return {x0, a * x0, b * x0};
}

}  // namespace lzd
