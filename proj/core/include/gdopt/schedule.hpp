#pragma once

#include <string>
#include <utility>
#include <vector>

namespace gdopt {

/// Forward-process noise schedule. The forward SDE
///   dX_t = -1/2 q(t) X_t dt + sqrt(q(t)) dW_t
/// has Gaussian transitions X_t | X_0 ~ N(alpha(t) X_0, h(t) I) with
///   alpha(t) = exp(-1/2 \int_0^t q),   h(t) = 1 - alpha(t)^2.
///
/// Immutable after construction; safe to share across threads. For the
/// tabulated variant the cumulative integral of q is cached at the knots,
/// q is piecewise linear so the quadrature is exact.
class NoiseSchedule {
 public:
  enum class Kind { ConstantRate, TabulatedRate };

  static NoiseSchedule constant(double rate, double horizon = 10.0);
  /// knots: (time, rate) pairs, strictly increasing in time, first at t = 0,
  /// last at t >= horizon, all rates positive.
  static NoiseSchedule tabulated(std::vector<std::pair<double, double>> knots,
                                 double horizon);

  Kind kind() const { return kind_; }
  double horizon() const { return horizon_; }
  double constant_rate() const { return rate_; }
  const std::vector<std::pair<double, double>>& knots() const { return knots_; }

  double rate(double t) const;
  double alpha(double t) const;
  double h(double t) const;
  std::pair<double, double> alpha_h(double t) const;

  std::string to_text() const;
  static NoiseSchedule from_text(const std::string& text);

 private:
  NoiseSchedule() = default;
  void check_time(double t) const;
  double integral_q(double t) const;  // \int_0^t q(s) ds

  Kind kind_ = Kind::ConstantRate;
  double rate_ = 1.0;
  double horizon_ = 10.0;
  std::vector<std::pair<double, double>> knots_;
  std::vector<double> cum_;  // integral of q at each knot
};

/// h(t) = 1 - exp(-sqrt(t)). Not generated by any q(t) variant above; used
/// only by the naive-guidance failure certificate.
double h_sqrt_schedule(double t);

}  // namespace gdopt
