#include "lzd/integrator.hpp"

#include "lzd/asymptotics.hpp"
#include "lzd/errors.hpp"
#include "lzd/ode.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>

namespace lzd {

namespace {

// x(+∞) is read off as the mean over this trailing fraction of the window.
constexpr double kAveragingFraction = 0.1;
// Decoherence beyond this multiple of max(Δ₁, √v) selects the implicit method.
constexpr double kStiffRatio = 2.0;
// Largest exponent the relaxation envelope may reach over a window.
constexpr double kMaxEnvelopeExponent = 700.0;

struct RunSpec {
  double t0 = 0.0;
  double t1 = 0.0;
  Vec3 y0 = Vec3::Zero();
  Method method = Method::DormandPrince;
  std::function<Mat3(double)> matrix;
  /// Maps an integrated state onto the reduced variables (x, p_r, p_i).
  std::function<Vec3(double, const Vec3&)> reduce;
  /// Maps an integrated state onto the reported trajectory columns.
  std::function<TrajectorySample(double, const Vec3&)> output;
  const SweepAsymptotics* asymptotics = nullptr;
  double head_scale = 1.0;
  bool record = false;
};

Method resolve_method(Method requested, double gamma, double delta1, double rate_scale) {
  if (requested != Method::Auto) return requested;
  return gamma > kStiffRatio * std::max(delta1, rate_scale) ? Method::Radau : Method::DormandPrince;
}

std::unique_ptr<ode::Stepper> make_stepper(const RunSpec& spec, const SimConfig& config) {
  const ode::Tolerances tol{config.rtol, config.atol};
  if (spec.method == Method::Radau) return std::make_unique<ode::RadauIIA5>(spec.matrix, tol);
  auto matrix = spec.matrix;
  return std::make_unique<ode::DormandPrince54>(
      [matrix](double t, const Vec3& y) { return Vec3(matrix(t) * y); }, tol);
}

TransitionResult run(const RunSpec& spec, const SimConfig& config) {
  TransitionResult result;
  result.t_window = {spec.t0, spec.t1};
  result.method = spec.method;
  result.asymptotic = spec.asymptotics != nullptr;

  auto stepper = make_stepper(spec, config);
  stepper->reset(spec.t0, spec.y0);

  const double n0 = pseudo_norm(spec.reduce(spec.t0, spec.y0));
  result.initial_norm = n0;
  double n_prev = n0;
  const double growth_limit = n0 + 1e3 * config.rtol;

  auto samples = config.sample_times;
  std::sort(samples.begin(), samples.end());
  auto next_sample = std::lower_bound(samples.begin(), samples.end(), spec.t0);
  const bool dense_samples = spec.record && !samples.empty();
  const bool step_points = spec.record && samples.empty() && config.emit_trajectory;

  if (dense_samples) {
    while (next_sample != samples.end() && *next_sample == spec.t0) {
      result.trajectory.push_back(spec.output(spec.t0, spec.y0));
      ++next_sample;
    }
  } else if (step_points) {
    result.trajectory.push_back(spec.output(spec.t0, spec.y0));
  }

  const double t_avg = spec.asymptotics
                           ? spec.t1 - kAveragingFraction * (spec.t1 - spec.t0)
                           : spec.t1;
  double avg_sum = 0.0;
  double avg_weight = 0.0;
  double e_prev = 0.0;
  auto estimator = [&](double t, const Vec3& reduced) {
    const SweepAsymptotics& asym = *spec.asymptotics;
    return asym.invariant(t, reduced) * std::exp(-asym.exponent_between(t, spec.t1));
  };

  auto fill_partial = [&](TransitionResult& r) {
    r.x_end = stepper->y()[0];
    r.final_norm = pseudo_norm(spec.reduce(stepper->t(), stepper->y()));
    r.n_steps = stepper->stats().accepted;
    r.n_rejected = stepper->stats().rejected;
  };

  const std::array<double, 2> legs{t_avg, spec.t1};
  for (std::size_t leg = 0; leg < legs.size(); ++leg) {
    const double leg_end = legs[leg];
    if (!(leg_end > stepper->t())) continue;
    const bool averaging = spec.asymptotics && leg == 1;
    if (averaging) e_prev = estimator(stepper->t(), spec.reduce(stepper->t(), stepper->y()));

    while (stepper->t() < leg_end) {
      if (stepper->stats().accepted >= config.max_steps) {
        fill_partial(result);
        std::ostringstream msg;
        msg << "step budget of " << config.max_steps << " exhausted at t = " << stepper->t();
        throw NonConvergence(msg.str(), std::move(result));
      }
      stepper->step(leg_end);
      const double t = stepper->t();
      const Vec3& y = stepper->y();
      const Vec3 reduced = spec.reduce(t, y);
      const double n = pseudo_norm(reduced);
      if (!(n <= growth_limit)) {
        std::ostringstream msg;
        msg << "pseudo-norm grew from " << n0 << " to " << n << " at t = " << t;
        throw InstabilityError(msg.str());
      }
      if (config.check_norm_monotone && n > n_prev + 10.0 * (config.atol + config.rtol * n_prev)) {
        std::ostringstream msg;
        msg << "pseudo-norm increased from " << n_prev << " to " << n << " at t = " << t;
        throw InstabilityError(msg.str());
      }
      n_prev = n;

      if (dense_samples) {
        while (next_sample != samples.end() && *next_sample <= t) {
          result.trajectory.push_back(spec.output(*next_sample, stepper->dense(*next_sample)));
          ++next_sample;
        }
      } else if (step_points && stepper->stats().accepted % config.trajectory_stride == 0) {
        result.trajectory.push_back(spec.output(t, y));
      }

      if (averaging) {
        const double e = estimator(t, reduced);
        const double h = t - stepper->t_prev();
        avg_sum += 0.5 * (e_prev + e) * h;
        avg_weight += h;
        e_prev = e;
      }
    }
  }
  if (step_points && (result.trajectory.empty() || result.trajectory.back().t != spec.t1)) {
    result.trajectory.push_back(spec.output(spec.t1, stepper->y()));
  }

  fill_partial(result);
  if (spec.asymptotics) {
    const double tail = std::exp(-spec.asymptotics->outer_exponent(spec.t1));
    result.x_inf = spec.head_scale * tail * (avg_sum / avg_weight);
  } else {
    result.x_inf = spec.reduce(stepper->t(), stepper->y())[0];
  }
  return result;
}

// Shared driver for both systems. `build` fills the system-specific parts of
// a RunSpec for a given window and whether the state starts from the
// standard adiabatic condition.
struct Problem {
  std::function<RunSpec(double t0, double t1)> build;
  bool windowed = false;  // window chosen automatically (linear sweep)
};

TransitionResult drive(const Problem& problem, const SimConfig& config, double t0, double t1) {
  RunSpec spec = problem.build(t0, t1);
  spec.record = config.emit_trajectory || !config.sample_times.empty();
  TransitionResult result = run(spec, config);
  if (problem.windowed && config.window_doubling) {
    RunSpec wide = problem.build(2.0 * t0, 2.0 * t1);
    wide.record = false;
    const TransitionResult doubled = run(wide, config);
    result.x_inf_uncertainty = std::abs(result.x_inf - doubled.x_inf);
  }
  return result;
}

double linear_rate_scale(const BiasProfile& bias) {
  if (const auto* lin = std::get_if<LinearSweep>(&bias)) return std::sqrt(lin->v);
  return 1.0;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::Auto: return "auto";
    case Method::DormandPrince: return "dopri5";
    case Method::Radau: return "radau5";
  }
  return "unknown";
}

void validate(const SimConfig& config) {
  if (!(config.rtol > 0.0) || !std::isfinite(config.rtol)) throw InvalidInput("rtol must be > 0");
  if (!(config.atol > 0.0) || !std::isfinite(config.atol)) throw InvalidInput("atol must be > 0");
  if (!(config.window_factor >= 10.0) || !std::isfinite(config.window_factor)) {
    throw InvalidInput("window_factor must be >= 10");
  }
  if (config.max_steps <= 0) throw InvalidInput("max_steps must be > 0");
  if (config.trajectory_stride <= 0) throw InvalidInput("trajectory_stride must be > 0");
  for (double t : config.sample_times) {
    if (!std::isfinite(t)) throw InvalidInput("sample times must be finite");
  }
  if (config.t_end && !std::isfinite(*config.t_end)) throw InvalidInput("t_end must be finite");
}

std::pair<double, double> auto_window(const ModelParams& params, const LinearSweep& bias,
                                      const SimConfig& config) {
  validate(params);
  if (!(bias.v > 0.0) || !std::isfinite(bias.v)) {
    throw InvalidProfile("automatic window requires a linear sweep with v > 0");
  }
  const double v = bias.v;
  const double span = std::max({params.delta1() / v, 1.0 / std::sqrt(v), params.gamma_11() / v});
  const double t = config.window_factor * span;
  return {-t, t};
}

InitialCondition standard_initial_condition(const ModelParams& params, const LinearSweep& bias,
                                            double t0) {
  const SweepAsymptotics asym(params.delta1(), bias.v, params.gamma_d);
  return {ReducedState::from(asym.adiabatic_state(t0)), t0};
}

TransitionResult integrate(const ModelParams& params, const BiasProfile& bias,
                           const std::optional<InitialCondition>& init, const SimConfig& config) {
  validate(params);
  validate(bias);
  validate(config);
  const double delta1 = params.delta1();
  const double gamma = params.gamma_d;
  const Method method = resolve_method(config.method, gamma, delta1, linear_rate_scale(bias));

  auto matrix = [delta1, gamma, bias](double t) {
    return reduced_matrix(delta1, gamma, bias_at(bias, t));
  };
  auto identity = [](double, const Vec3& y) { return y; };
  auto output = [](double t, const Vec3& y) { return TrajectorySample{t, y[0], y[1], y[2]}; };

  if (const auto* lin = std::get_if<LinearSweep>(&bias)) {
    const auto window = auto_window(params, *lin, config);
    auto asym = std::make_shared<SweepAsymptotics>(delta1, lin->v, gamma);
    double t_start = window.first;
    if (init) {
      if (!(init->t0 < window.second * (1.0 - 2.0 * kAveragingFraction))) {
        throw InvalidInput("initial time must precede the averaging part of the window");
      }
      t_start = init->t0;
    }
    Problem problem;
    problem.windowed = true;
    problem.build = [&, asym](double t0, double t1) {
      RunSpec spec;
      spec.t0 = init ? t_start : t0;
      spec.t1 = t1;
      spec.method = method;
      spec.matrix = matrix;
      spec.reduce = identity;
      spec.output = output;
      spec.asymptotics = asym.get();
      if (init) {
        spec.y0 = init->state.vec();
      } else {
        spec.y0 = asym->adiabatic_state(t0);
        spec.head_scale =
            std::exp(-asym->outer_exponent(t0)) / asym->invariant(t0, spec.y0);
      }
      return spec;
    };
    if (init) {
      // The start is fixed by the caller; only the end of the window moves.
      problem.windowed = false;
      TransitionResult r = drive(problem, config, t_start, window.second);
      if (config.window_doubling) {
        RunSpec wide = problem.build(t_start, 2.0 * window.second);
        r.x_inf_uncertainty = std::abs(r.x_inf - run(wide, config).x_inf);
      }
      return r;
    }
    return drive(problem, config, window.first, window.second);
  }

  if (!init) throw InvalidInput("non-linear profiles need an explicit initial condition");
  if (!config.t_end) throw InvalidInput("non-linear profiles need an end time (t_end)");
  if (!(*config.t_end > init->t0)) throw InvalidInput("t_end must be after the initial time");
  Problem problem;
  problem.build = [&](double t0, double t1) {
    RunSpec spec;
    spec.t0 = t0;
    spec.t1 = t1;
    spec.y0 = init->state.vec();
    spec.method = method;
    spec.matrix = matrix;
    spec.reduce = identity;
    spec.output = output;
    return spec;
  };
  return drive(problem, config, init->t0, *config.t_end);
}

TransitionResult integrate_full(const ModelParams& params, const BiasProfile& bias,
                                const std::optional<FullInitialCondition>& init,
                                const SimConfig& config) {
  validate(params);
  validate(bias);
  validate(config);
  const double delta1 = params.delta1();
  const double gamma_e = params.gamma_e;
  const Method method =
      resolve_method(config.method, params.gamma_11(), delta1, linear_rate_scale(bias));

  auto matrix = [params, bias](double t) { return full_matrix(params, bias_at(bias, t)); };
  // Raw coherences -> gap frame; with no gap any fixed reflection will do.
  auto to_frame = [params, delta1](double r, double i) -> std::pair<double, double> {
    if (delta1 > 0.0) return rotate_to_reduced(r, i, params);
    return {r, -i};
  };

  auto make_spec = [&](double t0, double t1, const Vec3& y0) {
    if (gamma_e * (t1 - t0) > kMaxEnvelopeExponent) {
      throw InvalidInput("relaxation envelope underflows over the integration window");
    }
    RunSpec spec;
    spec.t0 = t0;
    spec.t1 = t1;
    spec.y0 = y0;
    spec.method = method;
    spec.matrix = matrix;
    spec.reduce = [to_frame, gamma_e, t0](double t, const Vec3& y) {
      const double lift = std::exp(gamma_e * (t - t0));
      const auto [pr, pi] = to_frame(y[1], y[2]);
      return Vec3(lift * y[0], lift * pr, lift * pi);
    };
    spec.output = [to_frame](double t, const Vec3& y) {
      const auto [pr, pi] = to_frame(y[1], y[2]);
      return TrajectorySample{t, y[0], pr, pi};
    };
    return spec;
  };

  if (const auto* lin = std::get_if<LinearSweep>(&bias)) {
    const auto window = auto_window(params, *lin, config);
    auto asym = std::make_shared<SweepAsymptotics>(delta1, lin->v, params.gamma_d);
    if (init && !(init->t0 < window.second * (1.0 - 2.0 * kAveragingFraction))) {
      throw InvalidInput("initial time must precede the averaging part of the window");
    }
    Problem problem;
    problem.windowed = !init;
    problem.build = [&, asym](double t0, double t1) {
      RunSpec spec;
      if (init) {
        spec = make_spec(init->t0, t1, init->state.vec());
      } else {
        const Vec3 reduced = asym->adiabatic_state(t0);
        const auto [rr, ri] = to_frame(reduced[1], reduced[2]);
        spec = make_spec(t0, t1, Vec3(reduced[0], rr, ri));
        spec.head_scale = std::exp(-asym->outer_exponent(t0)) / asym->invariant(t0, reduced);
      }
      spec.asymptotics = asym.get();
      return spec;
    };
    if (init) {
      TransitionResult r = drive(problem, config, init->t0, window.second);
      if (config.window_doubling) {
        r.x_inf_uncertainty =
            std::abs(r.x_inf - run(problem.build(init->t0, 2.0 * window.second), config).x_inf);
      }
      return r;
    }
    return drive(problem, config, window.first, window.second);
  }

  if (!init) throw InvalidInput("non-linear profiles need an explicit initial condition");
  if (!config.t_end) throw InvalidInput("non-linear profiles need an end time (t_end)");
  if (!(*config.t_end > init->t0)) throw InvalidInput("t_end must be after the initial time");
  Problem problem;
  problem.build = [&](double t0, double t1) { return make_spec(t0, t1, init->state.vec()); };
  return drive(problem, config, init->t0, *config.t_end);
}

}  // namespace lzd
