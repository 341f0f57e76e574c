#pragma once

// Adaptive one-step solvers for three-component systems.
//
// DormandPrince54 is the explicit 5(4) pair with FSAL and the standard
// fourth-order continuous extension. RadauIIA5 is the three-stage collocation
// method (order 5, L-stable) specialised to linear systems y' = A(t) y, so each
// stage system is a single 9x9 linear solve; its local error comes from step
// doubling.
//
// Both split the state into the population (component 0) and the coherence
// pair (components 1, 2) and measure each block's error by its Euclidean
// length against atol + rtol * (block length). Step selection is therefore
// invariant under rotations and reflections of the coherence pair.

#include "lzd/model.hpp"

#include <array>
#include <functional>

namespace lzd::ode {

struct Tolerances {
  double rtol = 1e-9;
  double atol = 1e-12;
};

struct StepStats {
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;  ///< right-hand side or matrix evaluations
};

/// Common stepping interface. step() performs exactly one accepted step that
/// does not pass t_stop, retrying internally after rejections.
class Stepper {
 public:
  virtual ~Stepper() = default;

  void reset(double t0, const Vec3& y0);
  virtual void step(double t_stop) = 0;
  /// Interpolates the last accepted step; valid for t in [t_prev(), t()].
  [[nodiscard]] virtual Vec3 dense(double t) const = 0;

  [[nodiscard]] double t() const { return t_; }
  [[nodiscard]] double t_prev() const { return t_prev_; }
  [[nodiscard]] const Vec3& y() const { return y_; }
  [[nodiscard]] double proposed_step() const { return h_; }
  [[nodiscard]] const StepStats& stats() const { return stats_; }

  void set_max_step(double h_max) { h_max_ = h_max; }

 protected:
  explicit Stepper(Tolerances tol) : tol_(tol) {}

  virtual void on_reset() = 0;
  /// Weighted size of a local error estimate given the states on both ends of
  /// the step; accepted when <= 1.
  [[nodiscard]] double error_ratio(const Vec3& err, const Vec3& a, const Vec3& b) const;
  /// Step length to attempt next, bounded by h_max and the distance to t_stop.
  [[nodiscard]] double clip_step(double t_stop) const;

  Tolerances tol_;
  double t_ = 0.0;
  double t_prev_ = 0.0;
  Vec3 y_ = Vec3::Zero();
  double h_ = 0.0;  ///< proposed next step, 0 = choose automatically
  double h_max_ = 0.0;
  StepStats stats_;
};

class DormandPrince54 final : public Stepper {
 public:
  using Rhs = std::function<Vec3(double, const Vec3&)>;

  DormandPrince54(Rhs rhs, Tolerances tol);

  void step(double t_stop) override;
  [[nodiscard]] Vec3 dense(double t) const override;

 private:
  void on_reset() override;
  [[nodiscard]] double initial_step(double t_stop);

  Rhs rhs_;
  Vec3 f_ = Vec3::Zero();  // derivative at (t_, y_), reused through FSAL
  std::array<Vec3, 5> cont_{};
  double h_last_ = 0.0;
};

class RadauIIA5 final : public Stepper {
 public:
  using MatrixFn = std::function<Mat3(double)>;

  RadauIIA5(MatrixFn a, Tolerances tol);

  void step(double t_stop) override;
  [[nodiscard]] Vec3 dense(double t) const override;

  /// Collocation nodes and coefficients, exposed for order-condition tests.
  static const std::array<double, 3>& nodes();
  static const std::array<std::array<double, 3>, 3>& coefficients();

 private:
  struct Segment {
    double t0 = 0.0;
    double h = 0.0;
    std::array<Vec3, 4> values{};  // y at nodes 0, c1, c2, 1
  };

  void on_reset() override;
  /// One collocation step of length h from (t, y); fills seg.
  void collocate(double t, const Vec3& y, double h, Segment& seg);

  MatrixFn a_;
  std::array<Segment, 2> last_{};  // the two half steps of the last accepted step
};

}  // namespace lzd::ode
