#pragma once

// Parameter sweeps over (v, γ_d) and estimation of γ_d from measured x(+∞).

#include "lzd/integrator.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace lzd {

struct SweepGrid {
  std::vector<double> v_values;
  std::vector<double> gamma_d_values;
  double delta1 = 1.0;
  double gamma_e = 0.0;
};

struct SweepRow {
  double v = 0.0;
  double gamma_d = 0.0;
  double x_inf = 0.0;  ///< NaN when the point failed
  double x_inf_uncertainty = 0.0;
  long n_steps = 0;
  double lz_xinf = 0.0;
  double incoherent_xinf = 0.0;
  bool ok = true;
  std::string error;
};

/// One row per grid point in v-major order.
struct SweepTable {
  std::vector<SweepRow> rows;

  [[nodiscard]] bool all_ok() const;
  /// Rows with the given γ_d, in increasing v.
  [[nodiscard]] std::vector<SweepRow> slice_gamma(double gamma_d) const;
  /// Rows with the given v, in increasing γ_d.
  [[nodiscard]] std::vector<SweepRow> slice_v(double v) const;
};

/// Integrates every grid point. Points are independent and may be spread over
/// `threads` workers (0 = hardware concurrency); the table order does not
/// depend on scheduling. Failures are recorded per row.
[[nodiscard]] SweepTable sweep(const SweepGrid& grid, const SimConfig& config, unsigned threads = 0);

struct XinfMinimum {
  double v = 0.0;
  double x_inf = 0.0;
};

/// Interior discrete minimum of x_inf over a slice sorted by v: strictly below
/// both neighbours and both endpoints. Requires at least five rows.
[[nodiscard]] std::optional<XinfMinimum> find_xinf_minimum(const std::vector<SweepRow>& slice);

struct FitSample {
  double v = 0.0;
  double x_inf = 0.0;
  std::optional<double> weight;
};

struct FitProblem {
  std::vector<FitSample> samples;
  double delta1 = 1.0;
  double gamma_e = 0.0;
  std::pair<double, double> gamma_d_bounds{1e-4, 1e3};
  double alpha = 1.0;  ///< default weights v^-alpha
  /// Resolution of the measured x values (about one percent in typical
  /// experiments); regularises the curvature error when the data are
  /// noiseless and sets the flatness threshold.
  double noise_floor = 1e-2;
  /// Above this standard error (in decades of γ_d) an interior optimum is
  /// reported as unidentifiable.
  double max_stderr_decades = 1.0;
};

struct FitResult {
  double gamma_d_hat = 0.0;
  double weighted_rss = 0.0;
  std::vector<double> residuals;  ///< model - measured, per sample
  std::vector<double> weights;    ///< normalised weights actually used
  std::vector<double> model_xinf;
  /// Standard error of log10 γ_d from a quadratic fit to the objective near
  /// the optimum; infinite when the optimum sits on a bound.
  double curvature_stderr = 0.0;
  bool at_bound = false;
  long n_model_evals = 0;
};

/// Throws InvalidInput on malformed problems.
void validate(const FitProblem& problem);

/// Normalised weights: given weights or v^-alpha, scaled to sum to one.
[[nodiscard]] std::vector<double> fit_weights(const FitProblem& problem);

/// Weighted least squares for γ_d over log γ_d within the bounds. Throws
/// Unidentifiable when the objective cannot resolve γ_d.
[[nodiscard]] FitResult fit_gamma_d(const FitProblem& problem, const SimConfig& config);

}  // namespace lzd
