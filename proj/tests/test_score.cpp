#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <filesystem>

#include "gdopt/rng.hpp"
#include "gdopt/schedule.hpp"
#include "gdopt/score.hpp"
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

GaussianDist random_stats(int dim, std::uint64_t seed) {
  Rng rng(Rng::stream(seed, 3));
  MatrixXd m(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < dim; ++i) m(i, j) = rng.normal();
  GaussianDist g;
  g.cov = m * m.transpose() / dim + 0.2 * MatrixXd::Identity(dim, dim);
  g.mean = VectorXd(dim);
  for (int i = 0; i < dim; ++i) g.mean(i) = rng.normal();
  return g;
}

}  // namespace

TEST_SUITE("score") {

TEST_CASE("mean-only fit") {
  // all samples equal: s(x,t) = -x + alpha v
  Dataset rep;
  rep.samples = VectorXd::Constant(3, 1.5).transpose().replicate(4, 1);
  const LinearScoreModel m = fit_mean_only(rep);
  const double t = 0.8, a = sched().alpha(t);
  VectorXd x(3);
  x << 1, -2, 0.5;
  CHECK((m.evaluate(x, t, sched()) - (-x + a * VectorXd::Constant(3, 1.5))).norm() < 1e-14);

  // zero-mean data: s = -x for all t
  Dataset sym;
  sym.samples.resize(2, 3);
  sym.samples << 1, 2, 3, -1, -2, -3;
  const LinearScoreModel m0 = fit_mean_only(sym);
  CHECK((m0.evaluate(x, 2.5, sched()) + x).norm() < 1e-14);

  // {0, 2 e1} at t = ln 4: s(e1) = -e1 + 0.5 e1
  Dataset two;
  two.samples.resize(2, 2);
  two.samples << 0, 0, 2, 0;
  const LinearScoreModel m2 = fit_mean_only(two);
  VectorXd e1(2);
  e1 << 1, 0;
  const VectorXd s = m2.evaluate(e1, std::log(4.0), sched());
  CHECK((s - (-0.5) * e1).norm() < 1e-14);

  // mean-only image of x under the look-ahead map at xbar = 0
  Dataset zero;
  zero.samples = MatrixXd::Zero(1, 2);
  CHECK((fit_mean_only(zero).evaluate(e1, 1.3, sched()) + e1).norm() == 0.0);
}

TEST_CASE("full-linear fit closed forms") {
  // identity covariance: s = -(x - alpha mu) at every t
  const VectorXd mu = VectorXd::LinSpaced(4, -1.0, 2.0);
  const LinearScoreModel ident = gaussian_model(mu, MatrixXd::Identity(4, 4));
  Rng rng(9);
  for (double t : {0.1, 1.0, 7.0}) {
    VectorXd x(4);
    for (int i = 0; i < 4; ++i) x(i) = rng.normal();
    const double a = sched().alpha(t);
    CHECK((ident.evaluate(x, t, sched()) + (x - a * mu)).norm() < 1e-12);
  }

  // degenerate covariance (repeated point): s = -(1/h)(x - alpha xbar)
  Dataset rep;
  rep.samples = VectorXd::Constant(3, 2.0).transpose().replicate(5, 1);
  const LinearScoreModel deg = fit_full_linear(rep);
  const double t = 1.0, a = sched().alpha(t), h = sched().h(t);
  VectorXd x(3);
  x << 1, 0, -1;
  const VectorXd expect = -(x - a * VectorXd::Constant(3, 2.0)) / h;
  CHECK((deg.evaluate(x, t, sched()) - expect).norm() < 1e-10);
  CHECK_THROWS_AS(deg.evaluate(x, 0.0, sched()), std::domain_error);

  // {+e1, -e1} in R^2 at t = ln 2: C = diag(-1, -2)
  Dataset pm;
  pm.samples.resize(2, 2);
  pm.samples << 1, 0, -1, 0;
  const LinearScoreModel m = fit_full_linear(pm);
  const auto [c, b] = m.affine_coeffs(std::log(2.0), sched());
  MatrixXd expect_c(2, 2);
  expect_c << -1, 0, 0, -2;
  CHECK((c - expect_c).norm() < 1e-12);
  CHECK(b.norm() < 1e-15);

  Dataset single;
  single.samples = MatrixXd::Zero(1, 2);
  CHECK_THROWS_AS(fit_full_linear(single), std::invalid_argument);
}

TEST_CASE("subspace fit") {
  const SubspaceBasis basis = random_orthonormal_basis(12, 3, 17);
  const Dataset data = generate_subspace(basis, LatentSpec::std_normal(), 300, 18);
  const LinearScoreModel m = fit_subspace(data);

  // uniform weights reproduce the plain mean
  const std::vector<double> w(data.n(), 0.7);
  const LinearScoreModel mw = fit_subspace(data, &w);
  const auto& plain = std::get<SubspaceModel>(m.variant());
  const auto& weighted = std::get<SubspaceModel>(mw.variant());
  CHECK((plain.xbar_w - weighted.xbar_w).norm() < 1e-12);

  const double t = 0.9, h = sched().h(t);
  Rng rng(4);
  VectorXd v(12);
  for (int i = 0; i < 12; ++i) v(i) = rng.normal();

  // x in the span: the score stays in the span
  const VectorXd x_in = basis.project(v);
  const VectorXd s_in = m.evaluate(x_in, t, sched());
  CHECK((s_in - basis.project(s_in)).norm() < 1e-12);

  // x orthogonal (AA'x = 0 in the formula): s = alpha AA' xbar - x/h
  const VectorXd x_out = v - basis.project(v);
  const VectorXd bias = sched().alpha(t) * basis.project(plain.xbar_w);
  CHECK((m.evaluate(x_out, t, sched()) - (bias - x_out / h)).norm() < 1e-12);

  CHECK_THROWS_AS(m.evaluate(v, 0.0, sched()), std::domain_error);
}

TEST_CASE("subspace basis recovery from data") {
  const SubspaceBasis basis = random_orthonormal_basis(10, 4, 31);
  Dataset data = generate_subspace(basis, LatentSpec::std_normal(), 500, 32);
  data.basis.reset();  // force recovery
  const LinearScoreModel m = fit_subspace(data);
  const SubspaceBasis* recovered = m.basis();
  REQUIRE(recovered != nullptr);
  CHECK(recovered->latent_dim() == 4);
  const MatrixXd p_true = basis.matrix() * basis.matrix().transpose();
  const MatrixXd p_rec = recovered->matrix() * recovered->matrix().transpose();
  CHECK((p_true - p_rec).norm() < 1e-8);

  // rank-deficient latent: all samples on one line inside a 2-d subspace
  const SubspaceBasis wide = random_orthonormal_basis(6, 2, 33);
  Dataset thin;
  thin.basis = wide;
  thin.samples.resize(40, 6);
  Rng rng(5);
  for (int i = 0; i < 40; ++i)
    thin.samples.row(i) = (rng.normal() * wide.matrix().col(0)).transpose();
  CHECK_THROWS_AS(fit_subspace(thin), std::invalid_argument);
}

TEST_CASE("frozen-covariance refit swaps only the bias") {
  const GaussianDist stats = random_stats(5, 71);
  const Dataset data = generate_gaussian(stats, 400, 72);
  const LinearScoreModel m = fit_frozen_cov(data);

  const auto& fc = std::get<FrozenCovModel>(m.variant());
  const LinearScoreModel same = refit_bias_frozen(m, fc.xbar_w);
  Rng rng(6);
  VectorXd x(5);
  for (int i = 0; i < 5; ++i) x(i) = rng.normal();
  CHECK((same.evaluate(x, 1.1, sched()) - m.evaluate(x, 1.1, sched())).norm() == 0.0);

  VectorXd mnew = VectorXd::Constant(5, 0.3);
  const LinearScoreModel refit = refit_bias_frozen(m, mnew);
  const auto [c_old, b_old] = m.affine_coeffs(1.1, sched());
  const auto [c_new, b_new] = refit.affine_coeffs(1.1, sched());
  CHECK((c_old - c_new).norm() == 0.0);
  CHECK((b_old - b_new).norm() > 1e-6);

  // identity covariance: refit mean m gives s = -(x - alpha m)
  Dataset iid;
  iid.samples.resize(2, 3);
  iid.samples << 1, 0, 0, -1, 0, 0;
  FrozenCovModel base{VectorXd::Zero(3), MatrixXd::Identity(3, 3),
                      make_spectral_cache(MatrixXd::Identity(3, 3)), VectorXd::Zero(3)};
  const LinearScoreModel ident = refit_bias_frozen(
      LinearScoreModel(base), VectorXd::Constant(3, 1.0));
  const double t = 0.6, a = sched().alpha(t);
  VectorXd q(3);
  q << 0.2, -0.4, 1.0;
  CHECK((ident.evaluate(q, t, sched()) + (q - a * VectorXd::Constant(3, 1.0))).norm() <
        1e-12);

  // zero mixture weight reverts to the pretrained mean
  const VectorXd mix = 1.0 * fc.mu0 + 0.0 * mnew;
  const LinearScoreModel reverted = refit_bias_frozen(m, mix);
  CHECK((std::get<FrozenCovModel>(reverted.variant()).xbar_w - fc.mu0).norm() == 0.0);

  CHECK_THROWS_AS(refit_bias_frozen(gaussian_model(stats.mean, stats.cov), mnew),
                  std::invalid_argument);
}

TEST_CASE("tweedie mean") {
  const GaussianDist stats = random_stats(6, 81);
  const LinearScoreModel m = gaussian_model(stats.mean, stats.cov);
  Rng rng(7);
  VectorXd x(6);
  for (int i = 0; i < 6; ++i) x(i) = rng.normal();

  // t = 0 returns the state itself
  CHECK((m.tweedie_mean(x, 0.0, sched()) - x).norm() == 0.0);

  // identity covariance: E[x0|x_t] = alpha x + h mu
  const LinearScoreModel ident = gaussian_model(stats.mean, MatrixXd::Identity(6, 6));
  for (double t : {0.4, 2.0}) {
    const double a = sched().alpha(t), h = sched().h(t);
    CHECK((ident.tweedie_mean(x, t, sched()) - (a * x + h * stats.mean)).norm() < 1e-12);
  }

  // general covariance: matches the Gaussian conditional mean by dense solve
  for (double t : {0.3, 1.7, 6.0}) {
    const double a = sched().alpha(t), h = sched().h(t);
    const MatrixXd lhs =
        a * a * stats.cov + h * MatrixXd::Identity(6, 6);
    const VectorXd expect =
        stats.mean + a * stats.cov * lhs.ldlt().solve(x - a * stats.mean);
    CHECK((m.tweedie_mean(x, t, sched()) - expect).norm() < 1e-10);
  }

  // subspace model: estimate stays in the span
  const SubspaceBasis basis = random_orthonormal_basis(10, 3, 82);
  const Dataset sub = generate_subspace(basis, LatentSpec::std_normal(), 200, 83);
  const LinearScoreModel sm = fit_subspace(sub);
  VectorXd z(10);
  for (int i = 0; i < 10; ++i) z(i) = rng.normal();
  const VectorXd est = sm.tweedie_mean(z, 1.2, sched());
  CHECK((est - basis.project(est)).norm() < 1e-10);
}

TEST_CASE("tweedie jacobian closed forms and finite differences") {
  const SubspaceBasis basis = random_orthonormal_basis(8, 3, 91);
  const Dataset sub = generate_subspace(basis, LatentSpec::std_normal(), 200, 92);
  const LinearScoreModel sm = fit_subspace(sub);
  const double t = 1.4, a = sched().alpha(t);
  const MatrixXd p = basis.matrix() * basis.matrix().transpose();
  CHECK((sm.tweedie_jacobian(t, sched()) - a * p).norm() < 1e-12);

  const GaussianDist stats = random_stats(8, 93);
  const LinearScoreModel ident = gaussian_model(stats.mean, MatrixXd::Identity(8, 8));
  CHECK((ident.tweedie_jacobian(t, sched()) - a * MatrixXd::Identity(8, 8)).norm() <
        1e-12);

  // central finite differences of tweedie_mean
  Dataset small;
  small.samples.resize(3, 4);
  small.samples << 1, 0, 2, -1, 0, 1, -1, 0.5, -1, 2, 0, 0;
  for (const LinearScoreModel& m :
       {fit_mean_only(small), fit_full_linear(small),
        gaussian_model(stats.mean, stats.cov)}) {
    const int dim = m.dim();
    const MatrixXd j = m.tweedie_jacobian(t, sched());
    const double eps = 1e-6;
    Rng rng(11);
    VectorXd x(dim);
    for (int i = 0; i < dim; ++i) x(i) = rng.normal();
    MatrixXd fd(dim, dim);
    for (int k = 0; k < dim; ++k) {
      VectorXd xp = x, xm = x;
      xp(k) += eps;
      xm(k) -= eps;
      fd.col(k) =
          (m.tweedie_mean(xp, t, sched()) - m.tweedie_mean(xm, t, sched())) / (2 * eps);
    }
    CHECK((j - fd).norm() < 1e-6);
  }
}

TEST_CASE("score decomposition") {
  const SubspaceBasis basis = random_orthonormal_basis(9, 3, 95);
  const Dataset sub = generate_subspace(basis, LatentSpec::std_normal(), 300, 96);
  const LinearScoreModel m = fit_subspace(sub);
  const double t = 0.8, h = sched().h(t);
  Rng rng(12);
  VectorXd v(9);
  for (int i = 0; i < 9; ++i) v(i) = rng.normal();

  const VectorXd x_in = basis.project(v);
  CHECK(decompose(m, x_in, t, sched()).orthogonal.norm() < 1e-12);

  const VectorXd x_out = v - basis.project(v);
  const ScoreDecomposition d = decompose(m, x_out, t, sched());
  CHECK((d.orthogonal + x_out / h).norm() < 1e-12);
  const auto& sm = std::get<SubspaceModel>(m.variant());
  CHECK((d.on_support - sched().alpha(t) * basis.project(sm.xbar_w)).norm() < 1e-12);

  const ScoreDecomposition full = decompose(m, v, t, sched());
  CHECK((full.on_support + full.orthogonal - m.evaluate(v, t, sched())).norm() < 1e-12);
  CHECK(std::abs(full.on_support.dot(full.orthogonal)) < 1e-10);

  CHECK_THROWS_AS(decompose(m, v, 0.0, sched()), std::domain_error);
  CHECK_THROWS_AS(
      decompose(gaussian_model(VectorXd::Zero(2), MatrixXd::Identity(2, 2)),
                VectorXd::Ones(2), 0.5, sched()),
      std::invalid_argument);
}

TEST_CASE("full-linear and subspace forms coincide on subspace stats") {
  const SubspaceBasis basis = random_orthonormal_basis(10, 4, 97);
  const Dataset sub = generate_subspace(basis, LatentSpec::std_normal(), 400, 98);
  const LinearScoreModel subspace = fit_subspace(sub);
  const auto& sm = std::get<SubspaceModel>(subspace.variant());
  // Sigma = AA^T, mu in the span: the two closed forms are the same function.
  const MatrixXd p = basis.matrix() * basis.matrix().transpose();
  const LinearScoreModel full = gaussian_model(basis.project(sm.xbar_w), p);
  Rng rng(13);
  for (double t : {0.2, 1.0, 4.0}) {
    VectorXd x(10);
    for (int i = 0; i < 10; ++i) x(i) = rng.normal();
    CHECK((full.evaluate(x, t, sched()) - subspace.evaluate(x, t, sched())).norm() <
          1e-8);
  }
}

TEST_CASE("score matching loss oracle agrees with Monte Carlo") {
  Dataset data;
  data.samples.resize(4, 3);
  data.samples << 1, 0, -1, 0.5, 2, 0, -1, 1, 1, 0, -2, 0.5;
  const double t = 0.7;
  const auto [a, h] = sched().alpha_h(t);
  const LinearScoreModel m = fit_full_linear(data);
  const auto [c, b] = m.affine_coeffs(t, sched());

  const double exact = score_match_loss(c, b, data, t, sched());
  Rng rng(14);
  double acc = 0.0;
  const int draws = 200000;
  for (int it = 0; it < draws; ++it) {
    const VectorXd x0 = data.samples.row(it % data.n()).transpose();
    VectorXd e(3);
    for (int i = 0; i < 3; ++i) e(i) = std::sqrt(h) * rng.normal();
    const VectorXd xt = a * x0 + e;
    const VectorXd target = -e / h;
    acc += (target - (c * xt + b)).squaredNorm();
  }
  const double mc = acc / draws;
  CHECK(std::abs(mc - exact) / exact < 0.02);

  // any perturbation of the joint minimizer increases the exact loss
  Rng prng(15);
  for (int rep = 0; rep < 10; ++rep) {
    MatrixXd dc(3, 3);
    VectorXd db(3);
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i) dc(i, j) = 0.05 * prng.normal();
    for (int i = 0; i < 3; ++i) db(i) = 0.05 * prng.normal();
    CHECK(score_match_loss(c + dc, b + db, data, t, sched()) > exact);
  }
}

TEST_CASE("model save and load") {
  const SubspaceBasis basis = random_orthonormal_basis(6, 2, 99);
  const Dataset sub = generate_subspace(basis, LatentSpec::std_normal(), 100, 100);
  const GaussianDist stats = random_stats(6, 101);
  const Dataset gauss = generate_gaussian(stats, 100, 102);
  const std::string path =
      (std::filesystem::temp_directory_path() / "gdopt_test_model.txt").string();
  Rng rng(16);
  VectorXd x(6);
  for (int i = 0; i < 6; ++i) x(i) = rng.normal();
  for (const LinearScoreModel& m : {fit_mean_only(gauss), fit_full_linear(gauss),
                                    fit_subspace(sub), fit_frozen_cov(gauss)}) {
    save_model(path, m);
    const LinearScoreModel loaded = load_model(path);
    CHECK(loaded.kind_name() == m.kind_name());
    CHECK((loaded.evaluate(x, 1.3, sched()) - m.evaluate(x, 1.3, sched())).norm() == 0.0);
  }
  std::filesystem::remove(path);
}

}  // TEST_SUITE
