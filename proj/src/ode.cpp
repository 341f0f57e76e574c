#include "lzd/ode.hpp"

#include "lzd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lzd::ode {

namespace {

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Continuous extension.
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

}  // namespace

void Stepper::reset(double t0, const Vec3& y0) {
  if (!std::isfinite(t0) || !y0.allFinite()) throw InvalidInput("non-finite initial state");
  t_ = t_prev_ = t0;
  y_ = y0;
  h_ = 0.0;
  stats_ = {};
  on_reset();
}

double Stepper::error_ratio(const Vec3& err, const Vec3& a, const Vec3& b) const {
  // Block 0 is the population, block 1 the coherence pair. Each block is
  // measured by its Euclidean length so that rotations of the pair do not
  // change the step sequence.
  const double sx = tol_.atol + tol_.rtol * std::max(std::abs(a[0]), std::abs(b[0]));
  const double sp = tol_.atol + tol_.rtol * std::max(a.tail<2>().norm(), b.tail<2>().norm());
  return std::max(std::abs(err[0]) / sx, err.tail<2>().norm() / sp);
}

double Stepper::clip_step(double t_stop) const {
  double h = h_;
  if (h_max_ > 0.0) h = std::min(h, h_max_);
  return std::min(h, t_stop - t_);
}

// ---------------------------------------------------------------------------

DormandPrince54::DormandPrince54(Rhs rhs, Tolerances tol) : Stepper(tol), rhs_(std::move(rhs)) {}

void DormandPrince54::on_reset() {
  f_ = rhs_(t_, y_);
  ++stats_.evaluations;
  h_last_ = 0.0;
  for (auto& c : cont_) c = y_;
  for (std::size_t i = 1; i < cont_.size(); ++i) cont_[i].setZero();
}

double DormandPrince54::initial_step(double t_stop) {
  const double span = t_stop - t_;
  const double d0 = error_ratio(y_, y_, y_);
  const double d1n = error_ratio(f_, y_, y_);
  double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
  h0 = std::min(h0, span);
  const Vec3 y1 = y_ + h0 * f_;
  const Vec3 f1 = rhs_(t_ + h0, y1);
  ++stats_.evaluations;
  const double d2 = error_ratio(f1 - f_, y_, y_) / h0;
  const double dmax = std::max(d1n, d2);
  const double h1 = dmax <= 1e-15 ? std::max(1e-6, 1e-3 * h0) : std::pow(0.01 / dmax, 1.0 / 5.0);
  return std::min({100.0 * h0, h1, span});
}

void DormandPrince54::step(double t_stop) {
  if (!(t_stop > t_)) throw InvalidInput("step target must lie ahead of the current time");
  if (h_ <= 0.0) h_ = initial_step(t_stop);

  bool last_rejected = false;
  for (;;) {
    const double h = clip_step(t_stop);
    const double min_step = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_));
    if (!(h > min_step)) throw InstabilityError("step size underflow in Dormand-Prince stepper");

    const Vec3& k1 = f_;
    const Vec3 k2 = rhs_(t_ + c2 * h, y_ + h * (a21 * k1));
    const Vec3 k3 = rhs_(t_ + c3 * h, y_ + h * (a31 * k1 + a32 * k2));
    const Vec3 k4 = rhs_(t_ + c4 * h, y_ + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vec3 k5 = rhs_(t_ + c5 * h, y_ + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec3 k6 =
        rhs_(t_ + h, y_ + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vec3 y_new = y_ + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const double t_new = (h == t_stop - t_) ? t_stop : t_ + h;
    const Vec3 k7 = rhs_(t_new, y_new);
    stats_.evaluations += 6;

    const Vec3 err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double ratio = error_ratio(err, y_, y_new);
    if (!std::isfinite(ratio)) throw InstabilityError("non-finite error estimate");

    double factor = ratio == 0.0 ? kMaxFactor
                                 : std::clamp(kSafety * std::pow(ratio, -0.2), kMinFactor, kMaxFactor);
    if (ratio <= 1.0) {
      if (last_rejected) factor = std::min(factor, 1.0);
      const Vec3 diff = y_new - y_;
      cont_[0] = y_;
      cont_[1] = diff;
      cont_[2] = h * k1 - diff;
      cont_[3] = diff - h * k7 - cont_[2];
      cont_[4] = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      h_last_ = h;
      t_prev_ = t_;
      t_ = t_new;
      y_ = y_new;
      f_ = k7;
      // A step shortened to hit t_stop must not shrink the proposal.
      h_ = (h < h_) ? std::max(h_, h * factor) : h * factor;
      ++stats_.accepted;
      return;
    }
    ++stats_.rejected;
    last_rejected = true;
    h_ = h * std::min(1.0, factor);
  }
}

Vec3 DormandPrince54::dense(double t) const {
  if (h_last_ == 0.0) return y_;
  const double theta = (t - t_prev_) / h_last_;
  const double theta1 = 1.0 - theta;
  return cont_[0] + theta * (cont_[1] + theta1 * (cont_[2] + theta * (cont_[3] + theta1 * cont_[4])));
}

// ---------------------------------------------------------------------------

namespace {

const double kSqrt6 = std::sqrt(6.0);

}  // namespace

const std::array<double, 3>& RadauIIA5::nodes() {
  static const std::array<double, 3> c{(4.0 - kSqrt6) / 10.0, (4.0 + kSqrt6) / 10.0, 1.0};
  return c;
}

const std::array<std::array<double, 3>, 3>& RadauIIA5::coefficients() {
  static const std::array<std::array<double, 3>, 3> a{{
      {(88.0 - 7.0 * kSqrt6) / 360.0, (296.0 - 169.0 * kSqrt6) / 1800.0,
       (-2.0 + 3.0 * kSqrt6) / 225.0},
      {(296.0 + 169.0 * kSqrt6) / 1800.0, (88.0 + 7.0 * kSqrt6) / 360.0,
       (-2.0 - 3.0 * kSqrt6) / 225.0},
      {(16.0 - kSqrt6) / 36.0, (16.0 + kSqrt6) / 36.0, 1.0 / 9.0},
  }};
  return a;
}

RadauIIA5::RadauIIA5(MatrixFn a, Tolerances tol) : Stepper(tol), a_(std::move(a)) {}

void RadauIIA5::on_reset() {
  for (auto& seg : last_) {
    seg.t0 = t_;
    seg.h = 0.0;
    seg.values.fill(y_);
  }
}

void RadauIIA5::collocate(double t, const Vec3& y, double h, Segment& seg) {
  using Mat9 = Eigen::Matrix<double, 9, 9>;
  using Vec9 = Eigen::Matrix<double, 9, 1>;
  const auto& c = nodes();
  const auto& a = coefficients();

  std::array<Mat3, 3> jac;
  for (int j = 0; j < 3; ++j) jac[j] = a_(t + c[j] * h);
  stats_.evaluations += 3;

  Mat9 m = Mat9::Identity();
  Vec9 rhs;
  for (int i = 0; i < 3; ++i) {
    rhs.segment<3>(3 * i) = y;
    for (int j = 0; j < 3; ++j) m.block<3, 3>(3 * i, 3 * j) -= h * a[i][j] * jac[j];
  }
  const Vec9 stages = m.partialPivLu().solve(rhs);

  seg.t0 = t;
  seg.h = h;
  seg.values[0] = y;
  for (int i = 0; i < 3; ++i) seg.values[i + 1] = stages.segment<3>(3 * i);
}

void RadauIIA5::step(double t_stop) {
  if (!(t_stop > t_)) throw InvalidInput("step target must lie ahead of the current time");
  if (h_ <= 0.0) {
    const Vec3 f = a_(t_) * y_;
    ++stats_.evaluations;
    const double rate = f.norm() / std::max(y_.norm(), tol_.atol);
    h_ = std::min(t_stop - t_, rate > 0.0 ? 0.01 / rate : t_stop - t_);
  }

  bool last_rejected = false;
  Segment full;
  std::array<Segment, 2> halves;
  for (;;) {
    const double h = clip_step(t_stop);
    const double min_step = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_));
    if (!(h > min_step)) throw InstabilityError("step size underflow in Radau stepper");

    collocate(t_, y_, h, full);
    collocate(t_, y_, 0.5 * h, halves[0]);
    collocate(t_ + 0.5 * h, halves[0].values[3], 0.5 * h, halves[1]);
    const Vec3& y_new = halves[1].values[3];

    // Order 5: the half-step result carries 1/31 of the difference.
    const double ratio = error_ratio(y_new - full.values[3], y_, y_new) / 31.0;
    if (!std::isfinite(ratio)) throw InstabilityError("non-finite error estimate");
    double factor = ratio == 0.0 ? kMaxFactor
                                 : std::clamp(kSafety * std::pow(ratio, -1.0 / 6.0), kMinFactor, kMaxFactor);
    if (ratio <= 1.0) {
      if (last_rejected) factor = std::min(factor, 1.0);
      last_ = halves;
      t_prev_ = t_;
      t_ = (h == t_stop - t_) ? t_stop : t_ + h;
      y_ = y_new;
      h_ = (h < h_) ? std::max(h_, h * factor) : h * factor;
      ++stats_.accepted;
      return;
    }
    ++stats_.rejected;
    last_rejected = true;
    h_ = h * std::min(1.0, factor);
  }
}

Vec3 RadauIIA5::dense(double t) const {
  const Segment& seg = (t <= last_[1].t0) ? last_[0] : last_[1];
  if (seg.h == 0.0) return y_;
  const auto& c = nodes();
  const std::array<double, 4> x{0.0, c[0], c[1], c[2]};
  const double s = (t - seg.t0) / seg.h;
  Vec3 out = Vec3::Zero();
  for (int i = 0; i < 4; ++i) {
    double w = 1.0;
    for (int j = 0; j < 4; ++j) {
      if (j != i) w *= (s - x[j]) / (x[i] - x[j]);
    }
    out += w * seg.values[i];
  }
  return out;
}

}  // namespace lzd::ode
