#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "gdopt/dataset.hpp"
#include "gdopt/rng.hpp"

using namespace gdopt;

TEST_SUITE("dataset") {

TEST_CASE("random orthonormal basis") {
  const SubspaceBasis a = random_orthonormal_basis(64, 16, 42);
  const MatrixXd gram = a.matrix().transpose() * a.matrix();
  CHECK((gram - MatrixXd::Identity(16, 16)).norm() < 1e-12);

  const SubspaceBasis b = random_orthonormal_basis(64, 16, 42);
  CHECK(a.matrix() == b.matrix());  // bit-identical per seed
  const SubspaceBasis c = random_orthonormal_basis(64, 16, 43);
  CHECK(a.matrix() != c.matrix());

  MatrixXd bad(3, 2);
  bad << 1, 1, 0, 1, 0, 0;
  CHECK_THROWS_AS(SubspaceBasis{bad}, std::invalid_argument);
  CHECK_THROWS_AS(random_orthonormal_basis(4, 5, 1), std::invalid_argument);
}

TEST_CASE("subspace samples live in the span") {
  const SubspaceBasis basis = random_orthonormal_basis(64, 16, 7);
  const Dataset data = generate_subspace(basis, LatentSpec::std_normal(), 65536, 11);
  double worst = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    const VectorXd x = data.samples.row(i).transpose();
    worst = std::max(worst, (x - basis.project(x)).norm());
  }
  CHECK(worst < 1e-12);
  CHECK(data.basis.has_value());

  // same seed, same data
  const Dataset again = generate_subspace(basis, LatentSpec::std_normal(), 128, 11);
  CHECK(again.samples == data.samples.topRows(128));
}

TEST_CASE("one-column basis zeroes the second coordinate") {
  MatrixXd a(2, 1);
  a << 1, 0;
  const Dataset data = generate_subspace(SubspaceBasis(a), LatentSpec::std_normal(), 3, 5);
  for (int i = 0; i < 3; ++i) CHECK(data.samples(i, 1) == 0.0);
}

TEST_CASE("identity basis recovers the identity covariance") {
  const int dim = 16;
  const SubspaceBasis basis(MatrixXd::Identity(dim, dim));
  const Dataset data = generate_subspace(basis, LatentSpec::std_normal(), 100000, 3);
  const GaussianDist stats = empirical_stats(data);
  CHECK((stats.cov - MatrixXd::Identity(dim, dim)).norm() < 0.1);
}

TEST_CASE("empirical stats") {
  Dataset two;
  two.samples.resize(2, 2);
  two.samples << 1, 0, -1, 0;
  const GaussianDist s2 = empirical_stats(two);
  CHECK(s2.mean.norm() == 0.0);
  CHECK(s2.cov(0, 0) == 1.0);
  CHECK(s2.cov(1, 1) == 0.0);

  Dataset one;
  one.samples.resize(1, 3);
  one.samples << 2, 3, 4;
  const GaussianDist s1 = empirical_stats(one);
  CHECK(s1.mean(1) == 3.0);
  CHECK(s1.cov.norm() == 0.0);

  const SubspaceBasis basis = random_orthonormal_basis(16, 4, 9);
  const Dataset sub = generate_subspace(basis, LatentSpec::std_normal(), 2000, 10);
  const GaussianDist ss = empirical_stats(sub);
  const MatrixXd p = basis.matrix() * basis.matrix().transpose();
  CHECK(((MatrixXd::Identity(16, 16) - p) * ss.cov).norm() < 1e-10);
}

TEST_CASE("stats are permutation invariant") {
  const SubspaceBasis basis = random_orthonormal_basis(8, 3, 1);
  Dataset data = generate_subspace(basis, LatentSpec::std_normal(), 500, 2);
  const GaussianDist before = empirical_stats(data);
  std::vector<int> perm(data.n());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(123);
  for (int i = data.n() - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.next_u64() % (i + 1)]);
  MatrixXd shuffled(data.n(), data.dim());
  for (int i = 0; i < data.n(); ++i) shuffled.row(i) = data.samples.row(perm[i]);
  data.samples = shuffled;
  const GaussianDist after = empirical_stats(data);
  CHECK((before.mean - after.mean).norm() < 1e-12);
  CHECK((before.cov - after.cov).norm() < 1e-12);
}

TEST_CASE("gaussian latent variant") {
  GaussianDist lat;
  lat.mean = VectorXd::Constant(3, 2.0);
  lat.cov = 0.25 * MatrixXd::Identity(3, 3);
  const SubspaceBasis basis = random_orthonormal_basis(10, 3, 4);
  const Dataset data = generate_subspace(basis, LatentSpec::gaussian(lat), 20000, 5);
  const GaussianDist stats = empirical_stats(data);
  CHECK((stats.mean - basis.matrix() * lat.mean).norm() < 0.05);
}

TEST_CASE("off-support ratio") {
  MatrixXd a(3, 1);
  a << 1, 0, 0;
  const SubspaceBasis basis(a);
  VectorXd in_span(3), diag(3), ortho(3);
  in_span << 2, 0, 0;
  diag << 1, 1, 0;
  ortho << 0, 3, 4;
  CHECK(off_support_ratio(in_span, basis) == 0.0);
  CHECK(off_support_ratio(diag, basis) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isinf(off_support_ratio(ortho, basis)));
  CHECK_THROWS_AS(off_support_ratio(VectorXd::Zero(3), basis), std::domain_error);
}

TEST_CASE("save and load round trip") {
  const SubspaceBasis basis = random_orthonormal_basis(12, 4, 21);
  const Dataset data = generate_subspace(basis, LatentSpec::std_normal(), 50, 22);
  const std::string path =
      (std::filesystem::temp_directory_path() / "gdopt_test_dataset.txt").string();
  save_dataset(path, data);
  const Dataset loaded = load_dataset(path);
  CHECK(loaded.n() == data.n());
  CHECK(loaded.seed == data.seed);
  CHECK((loaded.samples - data.samples).norm() == 0.0);
  REQUIRE(loaded.basis.has_value());
  CHECK((loaded.basis->matrix() - basis.matrix()).norm() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("gaussian validation") {
  GaussianDist bad;
  bad.mean = VectorXd::Zero(2);
  bad.cov.resize(2, 2);
  bad.cov << 1, 0.5, -0.5, 1;  // not symmetric
  CHECK_THROWS_AS(validate_gaussian(bad), std::invalid_argument);
  bad.cov << 1, 2, 2, 1;  // eigenvalue -1
  CHECK_THROWS_AS(validate_gaussian(bad), std::invalid_argument);
  bad.cov << 1, 0.5, 0.5, 1;
  CHECK_NOTHROW(validate_gaussian(bad));
}

}  // TEST_SUITE
