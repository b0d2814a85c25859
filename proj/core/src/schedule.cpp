#include "gdopt/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gdopt {

NoiseSchedule NoiseSchedule::constant(double rate, double horizon) {
  if (!(rate > 0.0)) throw std::invalid_argument("NoiseSchedule: rate must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("NoiseSchedule: horizon must be positive");
  NoiseSchedule s;
  s.kind_ = Kind::ConstantRate;
  s.rate_ = rate;
  s.horizon_ = horizon;
  return s;
}

NoiseSchedule NoiseSchedule::tabulated(std::vector<std::pair<double, double>> knots,
                                       double horizon) {
  if (!(horizon > 0.0)) throw std::invalid_argument("NoiseSchedule: horizon must be positive");
  if (knots.size() < 2) throw std::invalid_argument("NoiseSchedule: need at least two knots");
  if (knots.front().first != 0.0)
    throw std::invalid_argument("NoiseSchedule: first knot must be at t = 0");
  if (knots.back().first < horizon)
    throw std::invalid_argument("NoiseSchedule: knots must cover [0, horizon]");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (!(knots[i].second >= 0.0))
      throw std::invalid_argument("NoiseSchedule: rates must be nonnegative");
    if (i > 0 && !(knots[i].first > knots[i - 1].first))
      throw std::invalid_argument("NoiseSchedule: knot times must be strictly increasing");
    // An isolated zero-rate knot keeps alpha strictly decreasing; a zero
    // segment would stall the noising process.
    if (i > 0 && knots[i].second == 0.0 && knots[i - 1].second == 0.0)
      throw std::invalid_argument("NoiseSchedule: rate vanishes on a whole segment");
  }
  NoiseSchedule s;
  s.kind_ = Kind::TabulatedRate;
  s.horizon_ = horizon;
  s.knots_ = std::move(knots);
  s.cum_.resize(s.knots_.size(), 0.0);
  for (std::size_t i = 1; i < s.knots_.size(); ++i) {
    const auto& [t0, q0] = s.knots_[i - 1];
    const auto& [t1, q1] = s.knots_[i];
    s.cum_[i] = s.cum_[i - 1] + 0.5 * (t1 - t0) * (q0 + q1);
  }
  return s;
}

void NoiseSchedule::check_time(double t) const {
  const double slack = 1e-9 * std::max(1.0, horizon_);
  if (!(t >= -slack) || !(t <= horizon_ + slack))
    throw std::domain_error("NoiseSchedule: t outside [0, horizon]");
}

double NoiseSchedule::rate(double t) const {
  check_time(t);
  if (kind_ == Kind::ConstantRate) return rate_;
  t = std::clamp(t, 0.0, knots_.back().first);
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                             [](double v, const auto& k) { return v < k.first; });
  std::size_t i = (it == knots_.begin()) ? 0 : static_cast<std::size_t>(it - knots_.begin()) - 1;
  if (i >= knots_.size() - 1) i = knots_.size() - 2;
  const auto& [t0, q0] = knots_[i];
  const auto& [t1, q1] = knots_[i + 1];
  return q0 + (q1 - q0) * (t - t0) / (t1 - t0);
}

double NoiseSchedule::integral_q(double t) const {
  if (kind_ == Kind::ConstantRate) return rate_ * t;
  t = std::clamp(t, 0.0, knots_.back().first);
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                             [](double v, const auto& k) { return v < k.first; });
  std::size_t i = (it == knots_.begin()) ? 0 : static_cast<std::size_t>(it - knots_.begin()) - 1;
  if (i >= knots_.size() - 1) i = knots_.size() - 2;
  const auto& [t0, q0] = knots_[i];
  // q is linear on the segment, so the partial trapezoid is exact.
  const double qt = rate(t);
  return cum_[i] + 0.5 * (t - t0) * (q0 + qt);
}

double NoiseSchedule::alpha(double t) const {
  check_time(t);
  if (t <= 0.0) return 1.0;
  return std::exp(-0.5 * integral_q(t));
}

double NoiseSchedule::h(double t) const {
  const double a = alpha(t);
  return 1.0 - a * a;
}

std::pair<double, double> NoiseSchedule::alpha_h(double t) const {
  const double a = alpha(t);
  return {a, 1.0 - a * a};
}

std::string NoiseSchedule::to_text() const {
  std::ostringstream os;
  os.precision(17);
  if (kind_ == Kind::ConstantRate) {
    os << "schedule constant\nrate " << rate_ << "\nhorizon " << horizon_ << "\n";
  } else {
    os << "schedule tabulated\nknots " << knots_.size() << "\n";
    for (const auto& [t, q] : knots_) os << t << " " << q << "\n";
    os << "horizon " << horizon_ << "\n";
  }
  return os.str();
}

NoiseSchedule NoiseSchedule::from_text(const std::string& text) {
  std::istringstream is(text);
  std::string tag, kind;
  is >> tag >> kind;
  if (tag != "schedule") throw std::invalid_argument("NoiseSchedule: bad header");
  if (kind == "constant") {
    std::string k;
    double rate = 0, horizon = 0;
    is >> k >> rate >> k >> horizon;
    return constant(rate, horizon);
  }
  if (kind == "tabulated") {
    std::string k;
    std::size_t n = 0;
    is >> k >> n;
    std::vector<std::pair<double, double>> knots(n);
    for (auto& [t, q] : knots) is >> t >> q;
    double horizon = 0;
    is >> k >> horizon;
    return tabulated(std::move(knots), horizon);
  }
  throw std::invalid_argument("NoiseSchedule: unknown kind '" + kind + "'");
}

double h_sqrt_schedule(double t) {
  if (t < 0.0) throw std::domain_error("h_sqrt_schedule: t must be nonnegative");
  return 1.0 - std::exp(-std::sqrt(t));
}

}  // namespace gdopt
