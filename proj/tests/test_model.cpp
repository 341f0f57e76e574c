#include "lzd/errors.hpp"
#include "lzd/model.hpp"
#include "property.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace lzd;
using lzd::testing::for_all;
using lzd::testing::Gen;

namespace {

ModelParams real_gap(double delta, double gamma_d = 0.0, double gamma_e = 0.0) {
  return ModelParams{delta, 0.0, gamma_d, gamma_e};
}

ModelParams random_params(Gen& g) {
  const double mag = g.uniform(0.1, 3.0);
  const double phi = g.uniform(-std::numbers::pi, std::numbers::pi);
  return ModelParams{mag * std::cos(phi), mag * std::sin(phi), g.log_uniform(1e-3, 10.0),
                     g.coin() ? 0.0 : g.log_uniform(1e-3, 1.0)};
}

}  // namespace

TEST(DerivativeReduced, ZeroGapDecouplesPopulation) {
  const auto d = derivative_reduced({1.0, 0.0, 0.0}, 3.7, real_gap(0.0, 0.4), LinearSweep{2.0});
  EXPECT_EQ(d.x, 0.0);
  EXPECT_EQ(d.p_r, 0.0);
  EXPECT_EQ(d.p_i, 0.0);
}

TEST(DerivativeReduced, GapDrivesImaginaryCoherence) {
  const auto d = derivative_reduced({1.0, 0.0, 0.0}, 0.0, real_gap(1.0), LinearSweep{1.0});
  EXPECT_EQ(d.x, 0.0);
  EXPECT_EQ(d.p_r, 0.0);
  EXPECT_DOUBLE_EQ(d.p_i, -0.5);
}

TEST(DerivativeReduced, LinearTermsReadOff) {
  // W₁ = 3 at t = 3 for v = 1.
  const auto d = derivative_reduced({0.0, 1.0, 0.0}, 3.0, real_gap(1.0, 2.0), LinearSweep{1.0});
  EXPECT_DOUBLE_EQ(d.x, 0.0);
  EXPECT_DOUBLE_EQ(d.p_r, -2.0);
  EXPECT_DOUBLE_EQ(d.p_i, 3.0);
}

TEST(DerivativeReduced, RejectsNonFiniteState) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW((void)derivative_reduced({nan, 0.0, 0.0}, 0.0, real_gap(1.0), LinearSweep{1.0}),
               InvalidInput);
  EXPECT_THROW((void)derivative_reduced({1.0, 0.0, 0.0}, std::numeric_limits<double>::infinity(),
                                        real_gap(1.0), LinearSweep{1.0}),
               InvalidInput);
}

TEST(DerivativeReduced, PseudoNormRateMatchesDecoherenceLoss) {
  for_all(200, 11, [](Gen& g) {
    const ModelParams p = real_gap(g.uniform(0.0, 3.0), g.uniform(0.0, 5.0));
    const ReducedState s{g.uniform(-1, 1), g.uniform(-0.5, 0.5), g.uniform(-0.5, 0.5)};
    const double t = g.uniform(-20, 20);
    const auto d = derivative_reduced(s, t, p, LinearSweep{g.uniform(0.1, 4.0)});
    const double dn = 0.5 * s.x * d.x + 2.0 * s.p_r * d.p_r + 2.0 * s.p_i * d.p_i;
    const double expected = -2.0 * p.gamma_d * (s.p_r * s.p_r + s.p_i * s.p_i);
    EXPECT_NEAR(dn, expected, 1e-12 * (1.0 + std::abs(expected)));
  });
}

TEST(DerivativeFull, NoCoherenceNoPopulationChange) {
  for (double phase : {0.0, 0.3, 2.0}) {
    const ModelParams p{2.0 * std::cos(phase), 2.0 * std::sin(phase), 0.7, 0.0};
    const auto d = derivative_full({1.0, 0.0, 0.0}, 1.5, p, LinearSweep{1.0});
    EXPECT_EQ(d.X1, 0.0);
  }
}

TEST(DerivativeFull, CoherenceTermAsPrinted) {
  const auto d = derivative_full({1.0, 0.0, 1.0}, 0.0, real_gap(1.0), LinearSweep{1.0});
  EXPECT_DOUBLE_EQ(d.X1, -2.0);
}

TEST(DerivativeFull, AgreesWithReducedAfterRotation) {
  // The full system is linear and homogeneous, so at any instant the rotated
  // full rate equals the reduced rate less the Γₑ decay of every component.
  for_all(300, 12, [](Gen& g) {
    const ModelParams p = random_params(g);
    const FullState raw{g.uniform(-1, 1), g.uniform(-0.5, 0.5), g.uniform(-0.5, 0.5)};
    const double t = g.uniform(-10, 10);
    const LinearSweep bias{g.uniform(0.1, 3.0)};

    const auto [pr, pi] = rotate_to_reduced(raw.rho_r, raw.rho_i, p);
    const ModelParams reduced{p.delta1(), 0.0, p.gamma_d, 0.0};
    const auto expect = derivative_reduced({raw.X1, pr, pi}, t, reduced, bias);
    const auto got = derivative_full(raw, t, p, bias);
    const auto [dpr, dpi] = rotate_to_reduced(got.rho_r, got.rho_i, p);

    EXPECT_NEAR(got.X1, expect.x - p.gamma_e * raw.X1, 1e-12);
    EXPECT_NEAR(dpr, expect.p_r - p.gamma_e * pr, 1e-12);
    EXPECT_NEAR(dpi, expect.p_i - p.gamma_e * pi, 1e-12);
  });
}

TEST(DerivativeFull, FiniteDifferenceAlongEnvelope) {
  // d/dt of x e^{-Γₑ(t - t0)} with the reduced rate, against derivative_full.
  const ModelParams p{0.6, 0.8, 0.3, 0.2};
  const LinearSweep bias{1.3};
  const double t0 = -1.0;
  const double t = 0.4;
  const double h = 1e-5;
  const Vec3 y0{0.9, 0.1, -0.2};  // reduced state at t
  const Mat3 a = reduced_matrix(p.delta1(), p.gamma_d, bias.v * t);
  auto reduced_at = [&](double s) { return Vec3(y0 + (s - t) * a * y0); };  // first order is enough
  auto raw_at = [&](double s) {
    const Vec3 y = reduced_at(s);
    const auto [rr, ri] = rotate_to_raw(y[1], y[2], p);
    return Vec3(Vec3(y[0], rr, ri) * std::exp(-p.gamma_e * (s - t0)));
  };
  const Vec3 fd = (raw_at(t + h) - raw_at(t - h)) / (2.0 * h);
  const Vec3 state = raw_at(t);
  const auto rate = derivative_full({state[0], state[1], state[2]}, t, p, bias);
  EXPECT_NEAR(rate.X1, fd[0], 1e-8);
  EXPECT_NEAR(rate.rho_r, fd[1], 1e-8);
  EXPECT_NEAR(rate.rho_i, fd[2], 1e-8);
}

TEST(Rotation, RealGapConjugates) {
  const auto [a, b] = rotate_to_reduced(0.3, 0.7, real_gap(2.0));
  EXPECT_DOUBLE_EQ(a, 0.3);
  EXPECT_DOUBLE_EQ(b, -0.7);
}

TEST(Rotation, DiagonalGap) {
  const double s = 1.0 / std::sqrt(2.0);
  const auto [a, b] = rotate_to_reduced(1.0, 0.0, ModelParams{s, s, 0.0, 0.0});
  EXPECT_NEAR(a, s, 1e-15);
  EXPECT_NEAR(b, s, 1e-15);
}

TEST(Rotation, PreservesLengthAndInverts) {
  for_all(300, 13, [](Gen& g) {
    const ModelParams p = random_params(g);
    const double a = g.uniform(-1, 1);
    const double b = g.uniform(-1, 1);
    const auto [r, i] = rotate_to_reduced(a, b, p);
    EXPECT_NEAR(r * r + i * i, a * a + b * b, 1e-14);
    const auto [a2, b2] = rotate_to_raw(r, i, p);
    EXPECT_NEAR(a2, a, 1e-14);
    EXPECT_NEAR(b2, b, 1e-14);
  });
}

TEST(Rotation, UndefinedForZeroGap) {
  EXPECT_THROW((void)rotate_to_reduced(1.0, 0.0, real_gap(0.0)), UndefinedRotation);
  EXPECT_THROW((void)rotate_to_raw(1.0, 0.0, real_gap(0.0)), DomainError);
}

TEST(Envelope, ZeroRateIsIdentity) {
  const std::vector<TimeValue> traj{{-2.0, 1.0}, {0.0, 0.5}, {3.0, -0.25}};
  const auto out = apply_relaxation_envelope(traj, 0.0, -2.0);
  ASSERT_EQ(out.size(), traj.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].t, traj[i].t);
    EXPECT_EQ(out[i].value, traj[i].value);
  }
}

TEST(Envelope, OneTimeUnitAtUnitRate) {
  const std::vector<TimeValue> traj{{1.0, 1.0}};
  EXPECT_NEAR(apply_relaxation_envelope(traj, 1.0, 0.0)[0].value, 0.367879441171442, 1e-15);
}

TEST(Envelope, RatesCompose) {
  for_all(100, 14, [](Gen& g) {
    const double a = g.uniform(0, 2);
    const double b = g.uniform(0, 2);
    const double t0 = g.uniform(-5, 0);
    std::vector<TimeValue> traj;
    for (int k = 0; k < 5; ++k) traj.push_back({t0 + g.uniform(0, 4), g.uniform(-1, 1)});
    const auto twice = apply_relaxation_envelope(apply_relaxation_envelope(traj, a, t0), b, t0);
    const auto once = apply_relaxation_envelope(traj, a + b, t0);
    for (std::size_t i = 0; i < traj.size(); ++i) EXPECT_NEAR(twice[i].value, once[i].value, 1e-14);
  });
}

TEST(Envelope, RejectsNegativeRate) {
  const std::vector<TimeValue> traj{{0.0, 1.0}};
  EXPECT_THROW((void)apply_relaxation_envelope(traj, -1.0, 0.0), InvalidInput);
}

TEST(Params, Validation) {
  EXPECT_NO_THROW(validate(real_gap(1.0, 0.0, 0.0)));
  EXPECT_THROW(validate(real_gap(1.0, -0.1)), InvalidInput);
  EXPECT_THROW(validate(real_gap(1.0, 0.1, -1.0)), InvalidInput);
  EXPECT_THROW(validate(real_gap(std::numeric_limits<double>::infinity())), InvalidInput);
  EXPECT_DOUBLE_EQ((ModelParams{3.0, 4.0, 0.0, 0.0}.delta1()), 5.0);
  EXPECT_DOUBLE_EQ((ModelParams{1.0, 0.0, 0.25, 0.5}.gamma_11()), 0.75);
}

TEST(Bias, PiecewiseInterpolatesAndHolds) {
  const BiasProfile b = PiecewiseLinear{{{-1.0, -2.0}, {1.0, 2.0}, {2.0, 0.0}}};
  EXPECT_DOUBLE_EQ(bias_at(b, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(bias_at(b, 1.5), 1.0);
  EXPECT_DOUBLE_EQ(bias_at(b, -10.0), -2.0);
  EXPECT_DOUBLE_EQ(bias_at(b, 10.0), 0.0);
  EXPECT_EQ(profile_name(b), "piecewise");
  EXPECT_FALSE(is_linear(b));
}

TEST(Bias, SinusoidAndLinear) {
  const BiasProfile s = Sinusoidal{2.0, 3.0, 0.5};
  EXPECT_DOUBLE_EQ(bias_at(s, 0.25), 2.0 * std::sin(1.25));
  const BiasProfile l = LinearSweep{0.5};
  EXPECT_DOUBLE_EQ(bias_at(l, -4.0), -2.0);
  EXPECT_TRUE(is_linear(l));
}

TEST(Bias, TabulatedUndefinedOutsideRange) {
  const BiasProfile b = Tabulated{{{0.0, 0.0}, {1.0, 1.0}}};
  EXPECT_DOUBLE_EQ(bias_at(b, 0.5), 0.5);
  EXPECT_THROW((void)bias_at(b, 1.5), InvalidProfile);
  EXPECT_THROW((void)bias_at(b, -0.1), InvalidProfile);
}

TEST(Bias, OrderingInvariant) {
  EXPECT_THROW(validate(BiasProfile{PiecewiseLinear{{{0.0, 1.0}, {0.0, 2.0}}}}), InvalidProfile);
  EXPECT_THROW(validate(BiasProfile{Tabulated{{{1.0, 1.0}, {0.0, 2.0}}}}), InvalidProfile);
  EXPECT_THROW(validate(BiasProfile{Tabulated{{{1.0, 1.0}}}}), InvalidProfile);
  EXPECT_THROW(validate(BiasProfile{PiecewiseLinear{}}), InvalidProfile);
  EXPECT_NO_THROW(validate(BiasProfile{LinearSweep{-1.0}}));  // finite-horizon use is allowed
}

TEST(PseudoNorm, Definition) {
  EXPECT_DOUBLE_EQ(pseudo_norm(ReducedState{1.0, 0.0, 0.0}), 0.25);
  EXPECT_DOUBLE_EQ(pseudo_norm(Vec3(2.0, 1.0, 1.0)), 3.0);
}
