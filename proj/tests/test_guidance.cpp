#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "gdopt/guidance.hpp"
#include "gdopt/rng.hpp"
#include "gdopt/sampler.hpp"
#include "gdopt/verify.hpp"

using namespace gdopt;

namespace {

const NoiseSchedule& sched() {
  static const NoiseSchedule s = NoiseSchedule::constant(1.0, 10.0);
  return s;
}

LinearScoreModel gaussian_model(const VectorXd& mu, const MatrixXd& sigma) {
  return LinearScoreModel(FullLinearModel{mu, sigma, make_spectral_cache(sigma)});
}

GuidanceSpec loss_spec(VectorXd g, double y, double sigma, BetaRule rule) {
  GuidanceSpec s;
  s.kind = GuidanceKind::Loss;
  s.g = std::move(g);
  s.y = y;
  s.sigma = sigma;
  s.beta_rule = rule;
  return s;
}

}  // namespace

TEST_SUITE("guidance") {

TEST_CASE("beta closed forms") {
  // identity covariance: beta = 1/(2 (sigma^2 + h ||g||^2)); h = 1/2 at t = ln 2
  const LinearScoreModel m =
      gaussian_model(VectorXd::Zero(3), MatrixXd::Identity(3, 3));
  VectorXd g = VectorXd::Zero(3);
  g(0) = 1.0;
  const GuidanceSpec spec = loss_spec(g, 0.0, 1.0, BetaRule::gaussian_theory());
  CHECK(beta(spec, m, std::log(2.0), sched()) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // h -> 0 limit: beta -> 1/(2 sigma^2)
  CHECK(beta(spec, m, 1e-9, sched()) == doctest::Approx(0.5).epsilon(1e-6));

  // subspace rule with an off-span gradient: beta = 1/(2 sigma^2) at every t
  const SubspaceBasis basis = random_orthonormal_basis(8, 3, 41);
  const Dataset sub = generate_subspace(basis, LatentSpec::std_normal(), 200, 42);
  const LinearScoreModel sm = fit_subspace(sub);
  Rng rng(1);
  VectorXd v(8);
  for (int i = 0; i < 8; ++i) v(i) = rng.normal();
  const VectorXd g_off = v - basis.project(v);
  const GuidanceSpec off = loss_spec(g_off, 0.0, 1.0, BetaRule::subspace_theory());
  for (double t : {0.2, 1.0, 5.0})
    CHECK(beta(off, sm, t, sched()) == doctest::Approx(0.5).epsilon(1e-12));

  // gaussian-theory rule on the subspace model coincides with the subspace rule
  const VectorXd g_any = v;
  const GuidanceSpec s1 = loss_spec(g_any, 0.0, 1.0, BetaRule::subspace_theory());
  const GuidanceSpec s2 = loss_spec(g_any, 0.0, 1.0, BetaRule::gaussian_theory());
  for (double t : {0.3, 2.0})
    CHECK(beta(s1, sm, t, sched()) == doctest::Approx(beta(s2, sm, t, sched())).epsilon(1e-12));

  const GuidanceSpec cst = loss_spec(g_any, 0.0, 1.0, BetaRule::constant(3.25));
  CHECK(beta(cst, sm, 1.0, sched()) == 3.25);
  CHECK_THROWS_AS(beta(loss_spec(g_any, 0.0, 1.0, BetaRule::constant(0.0)), sm, 1.0, sched()),
                  std::invalid_argument);
  // the subspace rule needs a subspace model
  CHECK_THROWS_AS(beta(s1, m, 1.0, sched()), std::invalid_argument);
}

TEST_CASE("scalar worked example") {
  // D = 1, Sigma = 1, mu = 0, sigma = 1, g = 1, y = 1, t with alpha^2 = h = 1/2
  const LinearScoreModel m =
      gaussian_model(VectorXd::Zero(1), MatrixXd::Identity(1, 1));
  const double t = std::log(2.0);
  const double a = sched().alpha(t);
  const GuidanceSpec spec = loss_spec(VectorXd::Ones(1), 1.0, 1.0, BetaRule::gaussian_theory());
  const VectorXd x0 = VectorXd::Zero(1);

  const VectorXd gl = g_loss(spec, m, x0, t, sched());
  CHECK(gl(0) == doctest::Approx(2.0 * a / 3.0).epsilon(1e-12));
  CHECK(gl(0) == doctest::Approx(0.4714045207910317).epsilon(1e-12));

  const VectorXd gn = g_naive(spec, m, x0, t, sched());
  CHECK(gn(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // s(0) = 0, so the guided score is the guidance; it equals the
  // hand-computed conditional score -(3/4)^{-1} (0 - alpha/2) = 2 alpha / 3.
  const VectorXd total = guided_score(spec, m, x0, t, sched());
  CHECK(total(0) == doctest::Approx(2.0 * a / 3.0).epsilon(1e-12));
}

TEST_CASE("zero residual and zero gradient") {
  const LinearScoreModel m =
      gaussian_model(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
  VectorXd x(2);
  x << 0.4, -1.0;
  const double t = 1.0;
  VectorXd g(2);
  g << 2.0, -1.0;
  GuidanceSpec spec = loss_spec(g, 0.0, 1.0, BetaRule::gaussian_theory());
  spec.y = g.dot(m.tweedie_mean(x, t, sched()));
  CHECK(g_loss(spec, m, x, t, sched()).norm() == 0.0);
  CHECK(g_naive(spec, m, x, t, sched()).norm() == 0.0);

  spec.g = VectorXd::Zero(2);
  spec.y = 5.0;
  CHECK(g_loss(spec, m, x, t, sched()).norm() == 0.0);  // no epsilon floor
}

TEST_CASE("loss guidance stays in the subspace") {
  const SubspaceBasis basis = random_orthonormal_basis(16, 5, 51);
  const Dataset sub = generate_subspace(basis, LatentSpec::std_normal(), 400, 52);
  const LinearScoreModel sm = fit_subspace(sub);
  Rng rng(2);
  for (int it = 0; it < 30; ++it) {
    VectorXd x(16), g(16);
    for (int i = 0; i < 16; ++i) x(i) = 2.0 * rng.normal();
    for (int i = 0; i < 16; ++i) g(i) = rng.normal();
    const double t = 0.05 + 9.0 * rng.uniform();
    const GuidanceSpec spec = loss_spec(g, 1.0 + rng.normal(), 1.0, BetaRule::subspace_theory());
    const VectorXd gl = g_loss(spec, sm, x, t, sched());
    if (gl.norm() == 0.0) continue;
    CHECK((gl - basis.project(gl)).norm() / gl.norm() < 1e-10);
  }
}

TEST_CASE("naive guidance is parallel to the gradient") {
  const SubspaceBasis basis = random_orthonormal_basis(10, 3, 53);
  const Dataset sub = generate_subspace(basis, LatentSpec::std_normal(), 300, 54);
  const LinearScoreModel sm = fit_subspace(sub);
  Rng rng(3);
  VectorXd x(10), g(10);
  for (int i = 0; i < 10; ++i) x(i) = rng.normal();
  for (int i = 0; i < 10; ++i) g(i) = rng.normal();
  const GuidanceSpec spec = loss_spec(g, 4.0, 1.0, BetaRule::subspace_theory());
  GuidanceSpec nspec = spec;
  nspec.kind = GuidanceKind::Naive;
  const VectorXd gn = g_naive(nspec, sm, x, 1.3, sched());
  const double cosine = gn.dot(g) / (gn.norm() * g.norm());
  CHECK(std::abs(std::abs(cosine) - 1.0) < 1e-12);

  // fully off-span gradient with nonzero residual: all of the output is off-span
  const VectorXd g_off = (g - basis.project(g)).normalized();
  GuidanceSpec off = nspec;
  off.g = g_off;
  off.y = 7.0;
  const VectorXd gn_off = g_naive(off, sm, x, 1.3, sched());
  CHECK(gn_off.norm() > 0.0);
  CHECK((gn_off - basis.project(gn_off)).norm() ==
        doctest::Approx(gn_off.norm()).epsilon(1e-12));
}

TEST_CASE("guided score none and gamma") {
  const LinearScoreModel m =
      gaussian_model(VectorXd::Ones(3), MatrixXd::Identity(3, 3));
  VectorXd x(3);
  x << 1, 0, -1;
  GuidanceSpec none;
  CHECK((guided_score(none, m, x, 0.9, sched()) - m.evaluate(x, 0.9, sched())).norm() ==
        0.0);

  GuidanceSpec spec = loss_spec(VectorXd::Ones(3), 2.0, 1.0, BetaRule::gaussian_theory());
  const VectorXd base = m.evaluate(x, 0.9, sched());
  const VectorXd g1 = guided_score(spec, m, x, 0.9, sched(), 1.0);
  const VectorXd g2 = guided_score(spec, m, x, 0.9, sched(), 2.0);
  CHECK((g2 - g1 - base).norm() < 1e-13);
  CHECK_THROWS_AS(guided_score(spec, m, x, 0.9, sched(), 0.4), std::invalid_argument);
}

TEST_CASE("conditional score identity for random Gaussian models") {
  Rng rng(5);
  const int dim = 6;
  MatrixXd root(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < dim; ++i) root(i, j) = rng.normal();
  GaussianDist stats;
  stats.cov = root * root.transpose() / dim + 0.1 * MatrixXd::Identity(dim, dim);
  stats.mean = VectorXd(dim);
  for (int i = 0; i < dim; ++i) stats.mean(i) = rng.normal();
  const LinearScoreModel m = gaussian_model(stats.mean, stats.cov);

  double worst = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double t = 0.05 + 9.5 * rng.uniform();
    VectorXd x(dim), g(dim);
    for (int i = 0; i < dim; ++i) x(i) = 2.0 * rng.normal();
    for (int i = 0; i < dim; ++i) g(i) = rng.normal();
    const double y = g.dot(stats.mean) + 2.0 * rng.normal();
    const GuidanceSpec spec = loss_spec(g, y, 1.0, BetaRule::gaussian_theory());
    const VectorXd lhs = guided_score(spec, m, x, t, sched());
    const VectorXd rhs = conditional_score_reference(stats, g, 1.0, y, x, t, sched());
    worst = std::max(worst, (lhs - rhs).norm() / rhs.norm());
  }
  CHECK(worst < 1e-10);

  // large observation noise: guidance fades into the unconditional score
  VectorXd g = VectorXd::Ones(dim).normalized();
  GuidanceSpec wide = loss_spec(g, 3.0, 1e6, BetaRule::gaussian_theory());
  VectorXd x = VectorXd::Ones(dim);
  const VectorXd guided = guided_score(wide, m, x, 1.0, sched());
  CHECK((guided - m.evaluate(x, 1.0, sched())).norm() < 1e-9);
}

TEST_CASE("residual linearity in the target") {
  const SubspaceBasis basis = random_orthonormal_basis(7, 2, 55);
  const Dataset sub = generate_subspace(basis, LatentSpec::std_normal(), 150, 56);
  const LinearScoreModel sm = fit_subspace(sub);
  Rng rng(6);
  VectorXd x(7), g(7);
  for (int i = 0; i < 7; ++i) x(i) = rng.normal();
  for (int i = 0; i < 7; ++i) g(i) = rng.normal();
  const double t = 1.6;
  GuidanceSpec s0 = loss_spec(g, 0.7, 1.0, BetaRule::subspace_theory());
  GuidanceSpec s1 = s0;
  s1.y = s0.y + 1.0;
  const VectorXd slope = g_loss(s1, sm, x, t, sched()) - g_loss(s0, sm, x, t, sched());
  const VectorXd expect =
      2.0 * beta(s0, sm, t, sched()) * sm.tweedie_jacobian_apply(g, t, sched());
  CHECK((slope - expect).norm() < 1e-12);
}

TEST_CASE("target values") {
  // Sigma = I, mu = 0, sigma = 1, ||g|| = 1, eta = 1/2 -> y = 1
  const LinearScoreModel m =
      gaussian_model(VectorXd::Zero(4), MatrixXd::Identity(4, 4));
  VectorXd g = VectorXd::Zero(4);
  g(1) = 1.0;
  CHECK(target_y(m, g, 1.0, 0.5) == doctest::Approx(1.0).epsilon(1e-12));

  // zero gradient: the posterior mean does not move, whatever y is
  const GaussianDist stats = m.implied_stats();
  const double y0 = target_y(m, VectorXd::Zero(4), 1.0, 0.5);
  const GaussianDist post = analytic_posterior(stats, VectorXd::Zero(4), y0, 1.0);
  CHECK((post.mean - stats.mean).norm() == 0.0);

  // subspace model with an off-span gradient: y = eta sigma^2 and no movement
  const SubspaceBasis basis = random_orthonormal_basis(9, 3, 57);
  const Dataset sub = generate_subspace(basis, LatentSpec::std_normal(), 300, 58);
  const LinearScoreModel sm = fit_subspace(sub);
  Rng rng(7);
  VectorXd v(9);
  for (int i = 0; i < 9; ++i) v(i) = rng.normal();
  const VectorXd g_off = v - basis.project(v);
  const double eta = 0.7, sigma = 1.3;
  CHECK(target_y(sm, g_off, sigma, eta) ==
        doctest::Approx(eta * sigma * sigma).epsilon(1e-10));
  const GaussianDist sstats = sm.implied_stats();
  const GaussianDist spost = analytic_posterior(
      sstats, g_off, target_y(sm, g_off, sigma, eta), sigma);
  CHECK((spost.mean - sstats.mean).norm() < 1e-12);

  CHECK_THROWS_AS(target_y(m, g, 1.0, 0.0), std::invalid_argument);
}

}  // TEST_SUITE
