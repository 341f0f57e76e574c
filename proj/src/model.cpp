#include "lzd/model.hpp"

#include "lzd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lzd {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << what << " must be finite (got " << value << ")";
    throw InvalidInput(msg.str());
  }
}

void validate_nodes(const std::vector<std::pair<double, double>>& nodes, const char* what) {
  if (nodes.empty()) throw InvalidProfile(std::string(what) + ": at least one node is required");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    require_finite(nodes[i].first, what);
    require_finite(nodes[i].second, what);
    if (i > 0 && !(nodes[i].first > nodes[i - 1].first)) {
      throw InvalidProfile(std::string(what) + ": node times must be strictly increasing");
    }
  }
}

// Linear interpolation on sorted nodes; the caller handles out-of-range t.
double interpolate(const std::vector<std::pair<double, double>>& nodes, double t) {
  auto upper = std::upper_bound(nodes.begin(), nodes.end(), t,
                                [](double value, const auto& node) { return value < node.first; });
  if (upper == nodes.begin()) return nodes.front().second;
  if (upper == nodes.end()) return nodes.back().second;
  const auto& [t1, w1] = *upper;
  const auto& [t0, w0] = *(upper - 1);
  const double s = (t - t0) / (t1 - t0);
  return w0 + s * (w1 - w0);
}

void require_finite_state(const Vec3& s) {
  if (!s.allFinite()) throw InvalidInput("state components must be finite");
}

}  // namespace

double ModelParams::delta1() const { return std::hypot(delta1_r, delta1_i); }

void validate(const ModelParams& params) {
  require_finite(params.delta1_r, "delta1");
  require_finite(params.delta1_i, "delta1_imag");
  require_finite(params.gamma_d, "gamma_d");
  require_finite(params.gamma_e, "gamma_e");
  if (params.gamma_d < 0.0) throw InvalidInput("gamma_d must be non-negative");
  if (params.gamma_e < 0.0) throw InvalidInput("gamma_e must be non-negative");
}

void validate(const BiasProfile& bias) {
  std::visit(Overloaded{
                 [](const LinearSweep& p) { require_finite(p.v, "bias.v"); },
                 [](const PiecewiseLinear& p) { validate_nodes(p.nodes, "bias.nodes"); },
                 [](const Sinusoidal& p) {
                   require_finite(p.amplitude, "bias.amplitude");
                   require_finite(p.angular_frequency, "bias.omega");
                   require_finite(p.phase, "bias.phase");
                 },
                 [](const Tabulated& p) {
                   validate_nodes(p.samples, "tabulated bias");
                   if (p.samples.size() < 2) {
                     throw InvalidProfile("tabulated bias: at least two samples are required");
                   }
                 },
             },
             bias);
}

double bias_at(const BiasProfile& bias, double t) {
  return std::visit(
      Overloaded{
          [t](const LinearSweep& p) { return p.v * t; },
          [t](const PiecewiseLinear& p) { return interpolate(p.nodes, t); },
          [t](const Sinusoidal& p) {
            return p.amplitude * std::sin(p.angular_frequency * t + p.phase);
          },
          [t](const Tabulated& p) {
            if (t < p.samples.front().first || t > p.samples.back().first) {
              std::ostringstream msg;
              msg << "tabulated bias is not defined at t = " << t << " (range "
                  << p.samples.front().first << " .. " << p.samples.back().first << ")";
              throw InvalidProfile(msg.str());
            }
            return interpolate(p.samples, t);
          },
      },
      bias);
}

bool is_linear(const BiasProfile& bias) { return std::holds_alternative<LinearSweep>(bias); }

std::string profile_name(const BiasProfile& bias) {
  return std::visit(Overloaded{
                        [](const LinearSweep&) { return std::string("linear"); },
                        [](const PiecewiseLinear&) { return std::string("piecewise"); },
                        [](const Sinusoidal&) { return std::string("sinusoidal"); },
                        [](const Tabulated&) { return std::string("tabulated"); },
                    },
                    bias);
}

double pseudo_norm(const Vec3& s) { return 0.25 * s[0] * s[0] + s[1] * s[1] + s[2] * s[2]; }

double pseudo_norm(const ReducedState& s) { return pseudo_norm(s.vec()); }

Mat3 reduced_matrix(double delta1, double gamma_d, double w1) {
  Mat3 a;
  a << 0.0, 0.0, 2.0 * delta1,  //
      0.0, -gamma_d, -w1,       //
      -0.5 * delta1, w1, -gamma_d;
  return a;
}

Mat3 full_matrix(const ModelParams& params, double w1) {
  const double dr = params.delta1_r;
  const double di = params.delta1_i;
  const double g = params.gamma_11();
  Mat3 a;
  a << -params.gamma_e, 2.0 * di, -2.0 * dr,  //
      -0.5 * di, -g, w1,                      //
      0.5 * dr, -w1, -g;
  return a;
}

ReducedState derivative_reduced(const ReducedState& state, double t, const ModelParams& params,
                                const BiasProfile& bias) {
  const Vec3 s = state.vec();
  require_finite_state(s);
  require_finite(t, "t");
  validate(params);
  return ReducedState::from(reduced_matrix(params.delta1(), params.gamma_d, bias_at(bias, t)) * s);
}

FullState derivative_full(const FullState& state, double t, const ModelParams& params,
                          const BiasProfile& bias) {
  const Vec3 s = state.vec();
  require_finite_state(s);
  require_finite(t, "t");
  validate(params);
  return FullState::from(full_matrix(params, bias_at(bias, t)) * s);
}

std::pair<double, double> rotate_to_reduced(double rho_r_raw, double rho_i_raw,
                                            const ModelParams& params) {
  const double d = params.delta1();
  if (!(d > 0.0)) throw UndefinedRotation("gap rotation undefined for |delta1| = 0");
  const double dr = params.delta1_r / d;
  const double di = params.delta1_i / d;
  return {di * rho_i_raw + dr * rho_r_raw, di * rho_r_raw - dr * rho_i_raw};
}

std::pair<double, double> rotate_to_raw(double rho_r, double rho_i, const ModelParams& params) {
  return rotate_to_reduced(rho_r, rho_i, params);
}

std::vector<TimeValue> apply_relaxation_envelope(std::span<const TimeValue> trajectory,
                                                 double gamma_e, double t0) {
  if (!(gamma_e >= 0.0)) throw InvalidInput("gamma_e must be non-negative");
  std::vector<TimeValue> out(trajectory.begin(), trajectory.end());
  if (gamma_e == 0.0) return out;
  for (auto& sample : out) sample.value *= std::exp(-gamma_e * (sample.t - t0));
  return out;
}

}  // namespace lzd
