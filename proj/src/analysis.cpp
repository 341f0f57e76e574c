#include "lzd/analysis.hpp"

#include "lzd/errors.hpp"
#include "lzd/limits.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <thread>

namespace lzd {

bool SweepTable::all_ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.ok; });
}

std::vector<SweepRow> SweepTable::slice_gamma(double gamma_d) const {
  std::vector<SweepRow> out;
  std::copy_if(rows.begin(), rows.end(), std::back_inserter(out),
               [gamma_d](const SweepRow& r) { return r.gamma_d == gamma_d; });
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.v < b.v; });
  return out;
}

std::vector<SweepRow> SweepTable::slice_v(double v) const {
  std::vector<SweepRow> out;
  std::copy_if(rows.begin(), rows.end(), std::back_inserter(out),
               [v](const SweepRow& r) { return r.v == v; });
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.gamma_d < b.gamma_d; });
  return out;
}

SweepTable sweep(const SweepGrid& grid, const SimConfig& config, unsigned threads) {
  if (grid.v_values.empty() || grid.gamma_d_values.empty()) {
    throw InvalidInput("sweep grid needs at least one v and one gamma_d value");
  }
  for (double v : grid.v_values) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("sweep velocities must be > 0");
  }
  for (double g : grid.gamma_d_values) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw InvalidInput("gamma_d values must be >= 0");
  }
  validate(config);

  SweepTable table;
  for (double v : grid.v_values) {
    for (double g : grid.gamma_d_values) {
      SweepRow row;
      row.v = v;
      row.gamma_d = g;
      row.lz_xinf = landau_zener_xinf(grid.delta1, v);
      row.incoherent_xinf = incoherent_xinf(grid.delta1, v);
      table.rows.push_back(row);
    }
  }

  SimConfig point_config = config;
  point_config.emit_trajectory = false;
  point_config.sample_times.clear();

  auto evaluate = [&](SweepRow& row) {
    const ModelParams params{grid.delta1, 0.0, row.gamma_d, grid.gamma_e};
    try {
      const TransitionResult r = integrate(params, LinearSweep{row.v}, std::nullopt, point_config);
      row.x_inf = r.x_inf;
      row.x_inf_uncertainty = r.x_inf_uncertainty;
      row.n_steps = r.n_steps;
    } catch (const NonConvergence& e) {
      row.ok = false;
      row.error = e.what();
      row.x_inf = std::numeric_limits<double>::quiet_NaN();
      row.n_steps = e.partial().n_steps;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
      row.x_inf = std::numeric_limits<double>::quiet_NaN();
    }
  };

  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(table.rows.size()));
  if (workers <= 1) {
    for (auto& row : table.rows) evaluate(row);
    return table;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < table.rows.size(); i = next++) evaluate(table.rows[i]);
    });
  }
  pool.clear();  // joins
  return table;
}

std::optional<XinfMinimum> find_xinf_minimum(const std::vector<SweepRow>& slice) {
  if (slice.size() < 5) return std::nullopt;
  std::size_t best = 1;
  for (std::size_t i = 1; i + 1 < slice.size(); ++i) {
    if (slice[i].x_inf < slice[best].x_inf) best = i;
  }
  const double x = slice[best].x_inf;
  const bool interior = x < slice[best - 1].x_inf && x < slice[best + 1].x_inf &&
                        x < slice.front().x_inf && x < slice.back().x_inf;
  if (!interior) return std::nullopt;
  return XinfMinimum{slice[best].v, x};
}

void validate(const FitProblem& problem) {
  if (problem.samples.size() < 3) throw InvalidInput("fitting needs at least three samples");
  for (const auto& s : problem.samples) {
    if (!(s.v > 0.0) || !std::isfinite(s.v)) throw InvalidInput("sample velocities must be > 0");
    if (!std::isfinite(s.x_inf)) throw InvalidInput("sample x_inf values must be finite");
    if (s.weight && (!(*s.weight >= 0.0) || !std::isfinite(*s.weight))) {
      throw InvalidInput("sample weights must be finite and >= 0");
    }
  }
  const bool any_weight = std::any_of(problem.samples.begin(), problem.samples.end(),
                                      [](const FitSample& s) { return s.weight.has_value(); });
  const bool all_weight = std::all_of(problem.samples.begin(), problem.samples.end(),
                                      [](const FitSample& s) { return s.weight.has_value(); });
  if (any_weight && !all_weight) throw InvalidInput("either all samples carry a weight or none");
  const auto [lo, hi] = problem.gamma_d_bounds;
  if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi)) {
    throw InvalidInput("gamma_d bounds must satisfy 0 < lo < hi");
  }
  if (!std::isfinite(problem.alpha)) throw InvalidInput("alpha must be finite");
  if (!(problem.noise_floor > 0.0)) throw InvalidInput("noise floor must be > 0");
  if (!(problem.delta1 >= 0.0) || !(problem.gamma_e >= 0.0)) {
    throw InvalidInput("delta1 and gamma_e must be >= 0");
  }
}

std::vector<double> fit_weights(const FitProblem& problem) {
  std::vector<double> w;
  w.reserve(problem.samples.size());
  for (const auto& s : problem.samples) {
    w.push_back(s.weight ? *s.weight : std::pow(s.v, -problem.alpha));
  }
  // Scale by the largest weight first so that equal weights of any size
  // normalise to exactly 1/n.
  const double peak = *std::max_element(w.begin(), w.end());
  if (!(peak > 0.0)) throw InvalidInput("at least one weight must be positive");
  for (double& x : w) x /= peak;
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  return w;
}

FitResult fit_gamma_d(const FitProblem& problem, const SimConfig& config) {
  validate(problem);
  validate(config);
  const std::vector<double> weights = fit_weights(problem);

  SimConfig model_config = config;
  model_config.window_doubling = false;
  model_config.emit_trajectory = false;
  model_config.sample_times.clear();

  FitResult result;
  std::map<std::pair<double, double>, double> cache;
  auto model = [&](double v, double log_gamma) {
    const auto key = std::make_pair(v, log_gamma);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    const ModelParams params{problem.delta1, 0.0, std::pow(10.0, log_gamma), problem.gamma_e};
    const double x = integrate(params, LinearSweep{v}, std::nullopt, model_config).x_inf;
    ++result.n_model_evals;
    cache.emplace(key, x);
    return x;
  };
  auto objective = [&](double log_gamma) {
    double f = 0.0;
    for (std::size_t i = 0; i < problem.samples.size(); ++i) {
      const auto& s = problem.samples[i];
      const double r = model(s.v, log_gamma) - s.x_inf;
      f += weights[i] * r * r;
    }
    return f;
  };

  const double lo = std::log10(problem.gamma_d_bounds.first);
  const double hi = std::log10(problem.gamma_d_bounds.second);
  constexpr int kSeeds = 5;
  std::array<double, kSeeds> seeds{};
  std::array<double, kSeeds> seed_f{};
  for (int k = 0; k < kSeeds; ++k) {
    seeds[k] = (k == kSeeds - 1) ? hi : lo + (hi - lo) * k / (kSeeds - 1);
    seed_f[k] = objective(seeds[k]);
  }
  const auto best_seed =
      static_cast<int>(std::min_element(seed_f.begin(), seed_f.end()) - seed_f.begin());
  const double f_spread = *std::max_element(seed_f.begin(), seed_f.end()) - seed_f[best_seed];
  if (!(f_spread > problem.noise_floor * problem.noise_floor)) {
    throw Unidentifiable("objective is flat across the gamma_d bounds");
  }

  const double a = seeds[std::max(best_seed - 1, 0)];
  const double b = seeds[std::min(best_seed + 1, kSeeds - 1)];
  std::uintmax_t iterations = 200;
  auto [theta, f_theta] = boost::math::tools::brent_find_minima(objective, a, b, 24, iterations);
  if (seed_f[best_seed] < f_theta) {
    theta = seeds[best_seed];
    f_theta = seed_f[best_seed];
  }

  const double step = 0.05;
  const double bound_tol = 1e-3;
  result.at_bound = (theta - lo) < bound_tol || (hi - theta) < bound_tol;
  const std::size_t n = problem.samples.size();
  const double sigma2 = std::max(f_theta * static_cast<double>(n) / static_cast<double>(n - 1),
                                 problem.noise_floor * problem.noise_floor);
  double curvature = 0.0;
  if (theta - step >= lo && theta + step <= hi) {
    curvature = (objective(theta + step) - 2.0 * f_theta + objective(theta - step)) / (step * step);
  } else {
    // One-sided quadratic through points stepping inward from the bound.
    const double dir = (theta - lo) < (hi - theta) ? 1.0 : -1.0;
    curvature = (objective(theta + 2.0 * dir * step) - 2.0 * objective(theta + dir * step) + f_theta) /
                (step * step);
  }
  result.curvature_stderr = curvature > 0.0 ? std::sqrt(2.0 * sigma2 / curvature)
                                            : std::numeric_limits<double>::infinity();
  if (!result.at_bound && result.curvature_stderr > problem.max_stderr_decades) {
    throw Unidentifiable("gamma_d is not resolved by the data (stderr " +
                         std::to_string(result.curvature_stderr) + " decades)");
  }

  result.gamma_d_hat = std::pow(10.0, theta);
  result.weights = weights;
  result.weighted_rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = model(problem.samples[i].v, theta);
    result.model_xinf.push_back(x);
    result.residuals.push_back(x - problem.samples[i].x_inf);
    result.weighted_rss += weights[i] * result.residuals.back() * result.residuals.back();
  }
  return result;
}

}  // namespace lzd
