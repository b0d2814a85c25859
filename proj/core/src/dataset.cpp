#include "gdopt/dataset.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "gdopt/rng.hpp"

namespace gdopt {

void validate_gaussian(const GaussianDist& g) {
  if (g.cov.rows() != g.cov.cols() || g.cov.rows() != g.mean.size())
    throw std::invalid_argument("GaussianDist: dimension mismatch");
  if ((g.cov - g.cov.transpose()).norm() > 1e-10)
    throw std::invalid_argument("GaussianDist: covariance not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(g.cov);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw std::invalid_argument("GaussianDist: covariance has negative eigenvalue");
}

SubspaceBasis::SubspaceBasis(MatrixXd a) : a_(std::move(a)) {
  if (a_.cols() > a_.rows())
    throw std::invalid_argument("SubspaceBasis: latent dim exceeds ambient dim");
  const MatrixXd gram = a_.transpose() * a_;
  const double err = (gram - MatrixXd::Identity(a_.cols(), a_.cols())).norm();
  if (err > 1e-10)
    throw std::invalid_argument("SubspaceBasis: columns not orthonormal");
}

SubspaceBasis random_orthonormal_basis(int ambient_dim, int latent_dim,
                                       std::uint64_t seed) {
  if (latent_dim < 1 || latent_dim > ambient_dim)
    throw std::invalid_argument("random_orthonormal_basis: need 1 <= d <= D");
  Rng rng(Rng::stream(seed, 0));
  MatrixXd m(ambient_dim, latent_dim);
  for (int j = 0; j < latent_dim; ++j)
    for (int i = 0; i < ambient_dim; ++i) m(i, j) = rng.normal();
  Eigen::HouseholderQR<MatrixXd> qr(m);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(ambient_dim, latent_dim);
  const MatrixXd r = qr.matrixQR().topLeftCorner(latent_dim, latent_dim);
  for (int j = 0; j < latent_dim; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return SubspaceBasis(q);
}

namespace {

MatrixXd draw_gaussian_rows(const GaussianDist& dist, int n, Rng& rng) {
  const int d = dist.dim();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(dist.cov);
  VectorXd lam = es.eigenvalues();
  if (lam.minCoeff() < -1e-10)
    throw std::invalid_argument("generate: covariance has negative eigenvalue");
  lam = lam.cwiseMax(0.0);
  const MatrixXd sqrt_cov = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
  MatrixXd rows(n, d);
  VectorXd z(d);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) z(k) = rng.normal();
    rows.row(i) = (dist.mean + sqrt_cov * z).transpose();
  }
  return rows;
}

}  // namespace

Dataset generate_subspace(const SubspaceBasis& basis, const LatentSpec& latent,
                          int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_subspace: n must be >= 1");
  const int d = basis.latent_dim();
  Rng rng(Rng::stream(seed, 0));
  MatrixXd u;
  if (latent.kind == LatentSpec::Kind::StdNormal) {
    u.resize(n, d);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < d; ++k) u(i, k) = rng.normal();
  } else {
    if (latent.gauss.dim() != d)
      throw std::invalid_argument("generate_subspace: latent dimension mismatch");
    u = draw_gaussian_rows(latent.gauss, n, rng);
  }
  Dataset out;
  out.samples = u * basis.matrix().transpose();
  out.basis = basis;
  out.seed = seed;
  return out;
}

Dataset generate_gaussian(const GaussianDist& dist, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_gaussian: n must be >= 1");
  Rng rng(Rng::stream(seed, 0));
  Dataset out;
  out.samples = draw_gaussian_rows(dist, n, rng);
  out.seed = seed;
  return out;
}

GaussianDist empirical_stats(const Dataset& data) {
  const int n = data.n();
  if (n < 1) throw std::invalid_argument("empirical_stats: empty dataset");
  GaussianDist g;
  g.mean = data.samples.colwise().mean();
  if (n == 1) {
    g.cov = MatrixXd::Zero(data.dim(), data.dim());
    return g;
  }
  const MatrixXd centered = data.samples.rowwise() - g.mean.transpose();
  g.cov = (centered.transpose() * centered) / static_cast<double>(n);
  g.cov = 0.5 * (g.cov + g.cov.transpose());
  return g;
}

double off_support_ratio(const VectorXd& x, const SubspaceBasis& basis) {
  if (x.norm() == 0.0)
    throw std::domain_error("off_support_ratio: x must be nonzero");
  const VectorXd on = basis.project(x);
  const double on_norm = on.norm();
  const double off_norm = (x - on).norm();
  if (on_norm == 0.0) return std::numeric_limits<double>::infinity();
  return off_norm / on_norm;
}

double mean_off_support_ratio(const MatrixXd& samples, const SubspaceBasis& basis) {
  double acc = 0.0;
  for (int i = 0; i < samples.rows(); ++i)
    acc += off_support_ratio(samples.row(i).transpose(), basis);
  return acc / static_cast<double>(samples.rows());
}

void save_dataset(const std::string& path, const Dataset& data) {
  std::ostringstream os;
  os.precision(17);
  os << "dataset v1\n";
  os << "n " << data.n() << "\nD " << data.dim() << "\n";
  if (data.basis) os << "d " << data.basis->latent_dim() << "\n";
  os << "seed " << data.seed << "\nsamples\n";
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.dim(); ++j) {
      if (j) os << " ";
      os << data.samples(i, j);
    }
    os << "\n";
  }
  if (data.basis) {
    os << "basis\n";
    const MatrixXd& a = data.basis->matrix();
    for (int i = 0; i < a.rows(); ++i) {
      for (int j = 0; j < a.cols(); ++j) {
        if (j) os << " ";
        os << a(i, j);
      }
      os << "\n";
    }
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("save_dataset: cannot open " + path);
  f << os.str();
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_dataset: cannot open " + path);
  std::string tag, version;
  f >> tag >> version;
  if (tag != "dataset") throw std::runtime_error("load_dataset: bad header in " + path);
  int n = 0, dim = 0, d = -1;
  std::uint64_t seed = 0;
  std::string key;
  while (f >> key) {
    if (key == "n") f >> n;
    else if (key == "D") f >> dim;
    else if (key == "d") f >> d;
    else if (key == "seed") f >> seed;
    else if (key == "samples") break;
    else throw std::runtime_error("load_dataset: unexpected field '" + key + "'");
  }
  if (n < 1 || dim < 1) throw std::runtime_error("load_dataset: bad dimensions");
  Dataset out;
  out.seed = seed;
  out.samples.resize(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) f >> out.samples(i, j);
  if (d > 0) {
    f >> key;
    if (key != "basis") throw std::runtime_error("load_dataset: missing basis block");
    MatrixXd a(dim, d);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < d; ++j) f >> a(i, j);
    out.basis = SubspaceBasis(a);
  }
  if (!f) throw std::runtime_error("load_dataset: truncated file " + path);
  return out;
}

}  // namespace gdopt
