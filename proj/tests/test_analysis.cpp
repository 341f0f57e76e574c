#include "lzd/analysis.hpp"
#include "lzd/errors.hpp"
#include "lzd/limits.hpp"
#include "property.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lzd;

namespace {

std::vector<SweepRow> slice_of(const std::vector<std::pair<double, double>>& vx) {
  std::vector<SweepRow> rows;
  for (const auto& [v, x] : vx) {
    SweepRow r;
    r.v = v;
    r.x_inf = x;
    rows.push_back(r);
  }
  return rows;
}

FitProblem synthetic(double gamma, const std::vector<double>& vs) {
  FitProblem problem;
  for (double v : vs) {
    const double x = integrate({1.0, 0.0, gamma, 0.0}, LinearSweep{v}, std::nullopt, SimConfig{}).x_inf;
    problem.samples.push_back({v, x, std::nullopt});
  }
  return problem;
}

}  // namespace

TEST(Sweep, SinglePointEqualsIntegrate) {
  SweepGrid grid{{1.0}, {0.0}, 1.0, 0.0};
  const auto table = sweep(grid, SimConfig{});
  ASSERT_EQ(table.rows.size(), 1u);
  const auto direct = integrate({1.0, 0.0, 0.0, 0.0}, LinearSweep{1.0}, std::nullopt, SimConfig{});
  EXPECT_EQ(table.rows[0].x_inf, direct.x_inf);
  EXPECT_EQ(table.rows[0].x_inf_uncertainty, direct.x_inf_uncertainty);
  EXPECT_EQ(table.rows[0].n_steps, direct.n_steps);
}

TEST(Sweep, FastSweepRowMatchesReferenceColumn) {
  const auto table = sweep(SweepGrid{{10.0}, {0.0}}, SimConfig{});
  const auto& row = table.rows.front();
  EXPECT_NEAR(row.x_inf, row.lz_xinf, 1e-3);
  EXPECT_NEAR(row.x_inf, 0.709, 1e-3);
  EXPECT_EQ(row.incoherent_xinf, incoherent_xinf(1.0, 10.0));
}

TEST(Sweep, RowOrderIsVelocityMajorAndThreadIndependent) {
  SweepGrid grid{{2.0, 0.5, 1.0}, {0.0, 1.0}};
  const auto one = sweep(grid, SimConfig{}, 1);
  const auto many = sweep(grid, SimConfig{}, 4);
  ASSERT_EQ(one.rows.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(one.rows[i].v, grid.v_values[i / 2]);
    EXPECT_EQ(one.rows[i].gamma_d, grid.gamma_d_values[i % 2]);
    EXPECT_EQ(one.rows[i].x_inf, many.rows[i].x_inf);
    EXPECT_EQ(one.rows[i].n_steps, many.rows[i].n_steps);
  }
  const auto s = one.slice_gamma(1.0);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_LT(s[0].v, s[1].v);
  EXPECT_LT(s[1].v, s[2].v);
  EXPECT_EQ(one.slice_v(0.5).size(), 2u);
}

TEST(Sweep, FailuresAreRecordedPerRow) {
  SimConfig c;
  c.max_steps = 200;
  const auto table = sweep(SweepGrid{{1.0}, {0.0, 2000.0}}, c);
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_FALSE(table.rows[0].ok);
  EXPECT_TRUE(std::isnan(table.rows[0].x_inf));
  EXPECT_FALSE(table.rows[0].error.empty());
  EXPECT_TRUE(table.rows[1].ok);  // the implicit method needs few steps here
  EXPECT_FALSE(table.all_ok());
}

TEST(Sweep, RejectsBadGrids) {
  EXPECT_THROW((void)sweep(SweepGrid{{}, {0.0}}, SimConfig{}), InvalidInput);
  EXPECT_THROW((void)sweep(SweepGrid{{0.0}, {0.0}}, SimConfig{}), InvalidInput);
  EXPECT_THROW((void)sweep(SweepGrid{{1.0}, {-1.0}}, SimConfig{}), InvalidInput);
}

TEST(Minimum, MonotoneSliceHasNone) {
  std::vector<std::pair<double, double>> vx;
  for (int k = 0; k < 10; ++k) {
    const double v = 0.1 * std::pow(2.0, k);
    vx.emplace_back(v, landau_zener_xinf(1.0, v));
  }
  EXPECT_FALSE(find_xinf_minimum(slice_of(vx)).has_value());
}

TEST(Minimum, InteriorDipFound) {
  const auto m = find_xinf_minimum(slice_of({{0.1, 0.2}, {0.2, 0.1}, {0.5, -0.3}, {1.0, 0.0}, {2.0, 0.4}}));
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(m->v, 0.5);
  EXPECT_EQ(m->x_inf, -0.3);
}

TEST(Minimum, RequiresFivePointsAndStrictDip) {
  EXPECT_FALSE(find_xinf_minimum(slice_of({{0.1, 0.2}, {0.5, -0.3}, {1.0, 0.0}, {2.0, 0.4}})).has_value());
  // Endpoint lower than the interior dip.
  EXPECT_FALSE(find_xinf_minimum(slice_of({{0.1, -1.0}, {0.2, 0.1}, {0.5, -0.3}, {1.0, 0.0}, {2.0, 0.4}})).has_value());
  // Flat bottom is not strict.
  EXPECT_FALSE(find_xinf_minimum(slice_of({{0.1, 0.2}, {0.2, -0.3}, {0.5, -0.3}, {1.0, 0.0}, {2.0, 0.4}})).has_value());
}

TEST(FitWeights, DefaultFavoursSlowSweeps) {
  FitProblem p;
  p.samples = {{0.1, 0.0, {}}, {1.0, 0.0, {}}, {10.0, 0.0, {}}};
  const auto w = fit_weights(p);
  EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-15);
  EXPECT_NEAR(w[0] / w[1], 10.0, 1e-12);
  EXPECT_NEAR(w[1] / w[2], 10.0, 1e-12);
}

TEST(FitWeights, EqualWeightsAreExactlyUniform) {
  lzd::testing::for_all(50, 51, [](lzd::testing::Gen& g) {
    const int n = g.integer(3, 12);
    const double w = g.log_uniform(1e-6, 1e6);
    FitProblem given;
    FitProblem alpha0;
    alpha0.alpha = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = g.log_uniform(0.05, 20.0);
      given.samples.push_back({v, 0.0, w});
      alpha0.samples.push_back({v, 0.0, std::nullopt});
    }
    EXPECT_EQ(fit_weights(given), fit_weights(alpha0));
  });
}

TEST(FitWeights, RescalingInvariant) {
  lzd::testing::for_all(50, 52, [](lzd::testing::Gen& g) {
    FitProblem a;
    FitProblem b;
    const double scale = std::pow(2.0, g.integer(-20, 20));
    for (int i = 0; i < 5; ++i) {
      const double w = g.uniform(0.1, 1.0);
      a.samples.push_back({1.0, 0.0, w});
      b.samples.push_back({1.0, 0.0, w * scale});
    }
    EXPECT_EQ(fit_weights(a), fit_weights(b));
  });
}

TEST(FitProblem, Validation) {
  FitProblem p;
  p.samples = {{0.1, 0.0, {}}, {1.0, 0.0, {}}};
  EXPECT_THROW(validate(p), InvalidInput);
  p.samples.push_back({2.0, 0.0, {}});
  EXPECT_NO_THROW(validate(p));
  p.gamma_d_bounds = {1.0, 0.5};
  EXPECT_THROW(validate(p), InvalidInput);
  p.gamma_d_bounds = {0.0, 1.0};
  EXPECT_THROW(validate(p), InvalidInput);
  p.gamma_d_bounds = {1e-3, 1.0};
  p.samples[0].weight = 1.0;
  EXPECT_THROW(validate(p), InvalidInput);  // weights must be all or none
  p.samples[1].weight = 1.0;
  p.samples[2].weight = -1.0;
  EXPECT_THROW(validate(p), InvalidInput);
}

TEST(Fit, RecoversGeneratingRate) {
  for (double gamma : {0.03, 0.1, 1.0}) {
    auto problem = synthetic(gamma, {0.1, 0.2, 0.5});
    const FitResult r = fit_gamma_d(problem, SimConfig{});
    EXPECT_NEAR(r.gamma_d_hat, gamma, 0.01 * gamma) << "gamma " << gamma;
    EXPECT_FALSE(r.at_bound);
    EXPECT_LT(r.curvature_stderr, 1.0);  // identifiable, in decades
    EXPECT_GE(r.weighted_rss, 0.0);
    EXPECT_EQ(r.residuals.size(), 3u);
    EXPECT_GT(r.n_model_evals, 0);
  }
}

TEST(Fit, CoherentDataGoesToLowerBound) {
  auto problem = synthetic(0.0, {0.1, 0.3, 1.0});
  problem.gamma_d_bounds = {1e-4, 10.0};
  const FitResult r = fit_gamma_d(problem, SimConfig{});
  EXPECT_TRUE(r.at_bound);
  EXPECT_NEAR(std::log10(r.gamma_d_hat), -4.0, 1e-3);
  for (std::size_t i = 0; i < r.model_xinf.size(); ++i) {
    EXPECT_NEAR(r.model_xinf[i], landau_zener_xinf(1.0, problem.samples[i].v), 1e-2);
  }
}

TEST(Fit, FastSweepsOnlyAreUnidentifiable) {
  auto problem = synthetic(0.1, {10.0, 15.0, 20.0});
  EXPECT_THROW((void)fit_gamma_d(problem, SimConfig{}), Unidentifiable);
}

TEST(Fit, EqualWeightsMatchUnweightedAlphaZero) {
  auto a = synthetic(0.2, {0.1, 0.3, 0.6});
  auto b = a;
  a.alpha = 0.0;
  for (auto& s : b.samples) s.weight = 3.5;
  EXPECT_EQ(fit_gamma_d(a, SimConfig{}).gamma_d_hat, fit_gamma_d(b, SimConfig{}).gamma_d_hat);
}
