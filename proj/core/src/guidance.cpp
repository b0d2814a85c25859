#include "gdopt/guidance.hpp"

#include <cmath>
#include <stdexcept>
#include <variant>

namespace gdopt {

namespace {

void check_sigma(const GuidanceSpec& spec) {
  if (!(spec.sigma > 0.0))
    throw std::invalid_argument("guidance: sigma must be positive");
}

}  // namespace

double beta(const GuidanceSpec& spec, const LinearScoreModel& model, double t,
            const NoiseSchedule& sched) {
  if (spec.beta_rule.kind == BetaRule::Kind::Constant) {
    if (!(spec.beta_rule.c > 0.0))
      throw std::invalid_argument("beta: constant rule needs c > 0");
    return spec.beta_rule.c;
  }
  check_sigma(spec);
  const auto [a, h] = sched.alpha_h(t);
  const double sigma2 = spec.sigma * spec.sigma;

  if (spec.beta_rule.kind == BetaRule::Kind::SubspaceTheory) {
    const SubspaceBasis* basis = model.basis();
    if (!basis)
      throw std::invalid_argument("beta: subspace rule needs a subspace model");
    const double gag = basis->project(spec.g).squaredNorm();
    return 0.5 / (sigma2 + h * gag);
  }

  // GaussianTheory through the model's implied covariance spectrum.
  return std::visit(
      [&, a = a, h = h](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MeanOnlyModel>) {
          (void)m;
          return 0.5 / (sigma2 + h * spec.g.squaredNorm());
        } else if constexpr (std::is_same_v<T, SubspaceModel>) {
          // Sigma = AA^T: identity eigenvalues on the span.
          const double gag = m.basis.project(spec.g).squaredNorm();
          const double den = a * a + h;  // == 1
          return 0.5 / (sigma2 + h * gag / den);
        } else {
          const SpectralCache& c = m.cache;
          const VectorXd w = c.u.transpose() * spec.g;
          double acc = 0.0;
          for (int i = 0; i < w.size(); ++i) {
            const double den = a * a * c.lam(i) + h;
            if (den > 0.0) acc += w(i) * w(i) * c.lam(i) / den;
          }
          return 0.5 / (sigma2 + h * acc);
        }
      },
      model.variant());
}

VectorXd g_loss(const GuidanceSpec& spec, const LinearScoreModel& model,
                const VectorXd& x_t, double t, const NoiseSchedule& sched) {
  if (spec.g.size() == 0 || spec.g.norm() == 0.0)
    return VectorXd::Zero(model.dim());
  const double b = beta(spec, model, t, sched);
  const double resid = spec.y - spec.g.dot(model.tweedie_mean(x_t, t, sched));
  return (2.0 * b * resid) * model.tweedie_jacobian_apply(spec.g, t, sched);
}

VectorXd g_naive(const GuidanceSpec& spec, const LinearScoreModel& model,
                 const VectorXd& x_t, double t, const NoiseSchedule& sched) {
  if (spec.g.size() == 0 || spec.g.norm() == 0.0)
    return VectorXd::Zero(model.dim());
  const double b = beta(spec, model, t, sched);
  const double resid = spec.y - spec.g.dot(model.tweedie_mean(x_t, t, sched));
  return (b * resid) * spec.g;
}

VectorXd guided_score(const GuidanceSpec& spec, const LinearScoreModel& model,
                      const VectorXd& x_t, double t, const NoiseSchedule& sched,
                      double gamma) {
  if (!(gamma > 0.5))
    throw std::invalid_argument("guided_score: gamma must exceed 1/2");
  VectorXd s = gamma * model.evaluate(x_t, t, sched);
  switch (spec.kind) {
    case GuidanceKind::None:
      return s;
    case GuidanceKind::Loss:
      return s + g_loss(spec, model, x_t, t, sched);
    case GuidanceKind::Naive:
      return s + g_naive(spec, model, x_t, t, sched);
  }
  return s;
}

double target_y(const LinearScoreModel& model, const VectorXd& g, double sigma,
                double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("target_y: eta must be positive");
  const GaussianDist stats = model.implied_stats();
  const double gsg = g.dot(stats.cov * g);
  return eta * (sigma * sigma + gsg) + g.dot(stats.mean);
}

}  // namespace gdopt
