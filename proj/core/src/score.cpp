#include "gdopt/score.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gdopt {

namespace {

constexpr double kAlphaFloor = 1e-12;
constexpr double kRankTol = 1e-8;

double weighted_sum(const std::vector<double>& w) {
  double s = 0.0;
  for (double v : w) {
    if (!(v > 0.0)) throw std::invalid_argument("weights must be positive");
    s += v;
  }
  return s;
}

}  // namespace

SpectralCache make_spectral_cache(const MatrixXd& cov) {
  if ((cov - cov.transpose()).norm() > 1e-10)
    throw std::invalid_argument("covariance not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (cov + cov.transpose()));
  SpectralCache c;
  c.u = es.eigenvectors();
  c.lam = es.eigenvalues();
  if (c.lam.minCoeff() < -1e-10)
    throw std::invalid_argument("covariance has negative eigenvalue");
  c.lam = c.lam.cwiseMax(0.0);
  c.min_lam = c.lam.minCoeff();
  return c;
}

int LinearScoreModel::dim() const {
  return std::visit(
      [](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MeanOnlyModel>)
          return static_cast<int>(m.xbar.size());
        else if constexpr (std::is_same_v<T, FullLinearModel>)
          return static_cast<int>(m.mu.size());
        else if constexpr (std::is_same_v<T, SubspaceModel>)
          return m.basis.ambient_dim();
        else
          return static_cast<int>(m.xbar_w.size());
      },
      v_);
}

std::string LinearScoreModel::kind_name() const {
  switch (v_.index()) {
    case 0: return "mean_only";
    case 1: return "full_linear";
    case 2: return "subspace";
    default: return "frozen_cov";
  }
}

const SubspaceBasis* LinearScoreModel::basis() const {
  if (const auto* m = std::get_if<SubspaceModel>(&v_)) return &m->basis;
  return nullptr;
}

namespace {

// -(alpha^2 Sigma + h I)^{-1} (x - alpha mean), via the cached spectrum.
VectorXd gaussian_score(const SpectralCache& c, const VectorXd& mean,
                        const VectorXd& x, double a, double h) {
  if (h == 0.0 && c.min_lam <= 1e-14 * std::max(1.0, c.lam.maxCoeff()))
    throw std::domain_error(
        "score undefined at t = 0 for singular covariance; evaluate at t > 0");
  const VectorXd w = c.u.transpose() * (x - a * mean);
  const VectorXd scaled =
      w.array() / (a * a * c.lam.array() + h);
  return -(c.u * scaled);
}

}  // namespace

VectorXd LinearScoreModel::evaluate(const VectorXd& x, double t,
                                    const NoiseSchedule& sched) const {
  const auto [a, h] = sched.alpha_h(t);
  return std::visit(
      [&](const auto& m) -> VectorXd {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MeanOnlyModel>) {
          return -x + a * m.xbar;
        } else if constexpr (std::is_same_v<T, FullLinearModel>) {
          return gaussian_score(m.cache, m.mu, x, a, h);
        } else if constexpr (std::is_same_v<T, SubspaceModel>) {
          if (h == 0.0)
            throw std::domain_error("subspace score divides by h(t); need t > 0");
          const VectorXd px = m.basis.project(x);
          return m.basis.project(a * m.xbar_w) - px + (px - x) / h;
        } else {
          return gaussian_score(m.cache, m.xbar_w, x, a, h);
        }
      },
      v_);
}

VectorXd LinearScoreModel::tweedie_mean(const VectorXd& x, double t,
                                        const NoiseSchedule& sched) const {
  const auto [a, h] = sched.alpha_h(t);
  if (a < kAlphaFloor)
    throw std::runtime_error("tweedie_mean: alpha(t) numerically degenerate");
  if (h == 0.0) return x / a;
  return (x + h * evaluate(x, t, sched)) / a;
}

VectorXd LinearScoreModel::tweedie_jacobian_apply(const VectorXd& g, double t,
                                                  const NoiseSchedule& sched) const {
  const auto [a, h] = sched.alpha_h(t);
  if (a < kAlphaFloor)
    throw std::runtime_error("tweedie_jacobian: alpha(t) numerically degenerate");
  return std::visit(
      [&](const auto& m) -> VectorXd {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MeanOnlyModel>) {
          (void)m;
          return a * g;
        } else if constexpr (std::is_same_v<T, SubspaceModel>) {
          return a * m.basis.project(g);
        } else {
          // alpha Sigma (alpha^2 Sigma + h I)^{-1} g, symmetric.
          const SpectralCache& c = m.cache;
          const VectorXd w = c.u.transpose() * g;
          VectorXd scaled(w.size());
          for (int i = 0; i < w.size(); ++i) {
            const double den = a * a * c.lam(i) + h;
            scaled(i) = (den == 0.0) ? 0.0 : w(i) * c.lam(i) / den;
          }
          return a * (c.u * scaled);
        }
      },
      v_);
}

MatrixXd LinearScoreModel::tweedie_jacobian(double t,
                                            const NoiseSchedule& sched) const {
  const int d = dim();
  MatrixXd j(d, d);
  // Column-by-column through the apply path keeps one formula per variant.
  VectorXd e = VectorXd::Zero(d);
  for (int k = 0; k < d; ++k) {
    e(k) = 1.0;
    j.col(k) = tweedie_jacobian_apply(e, t, sched);
    e(k) = 0.0;
  }
  return j;
}

std::pair<MatrixXd, VectorXd> LinearScoreModel::affine_coeffs(
    double t, const NoiseSchedule& sched) const {
  const auto [a, h] = sched.alpha_h(t);
  const int d = dim();
  return std::visit(
      [&](const auto& m) -> std::pair<MatrixXd, VectorXd> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MeanOnlyModel>) {
          return {-MatrixXd::Identity(d, d), a * m.xbar};
        } else if constexpr (std::is_same_v<T, SubspaceModel>) {
          if (h == 0.0)
            throw std::domain_error("subspace score divides by h(t); need t > 0");
          const MatrixXd& basis = m.basis.matrix();
          const MatrixXd p = basis * basis.transpose();
          MatrixXd c = (1.0 / h - 1.0) * p;
          c.diagonal().array() -= 1.0 / h;
          return {c, a * m.basis.project(m.xbar_w)};
        } else {
          const SpectralCache& cache = m.cache;
          const VectorXd& mean =
              [&]() -> const VectorXd& {
            if constexpr (std::is_same_v<T, FullLinearModel>) return m.mu;
            else return m.xbar_w;
          }();
          if (h == 0.0 && cache.min_lam <= 1e-14 * std::max(1.0, cache.lam.maxCoeff()))
            throw std::domain_error(
                "score undefined at t = 0 for singular covariance; evaluate at t > 0");
          const VectorXd inv = (a * a * cache.lam.array() + h).inverse();
          const MatrixXd c = -(cache.u * inv.asDiagonal() * cache.u.transpose());
          return {c, -a * (c * mean)};
        }
      },
      v_);
}

GaussianDist LinearScoreModel::implied_stats() const {
  return std::visit(
      [&](const auto& m) -> GaussianDist {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MeanOnlyModel>) {
          const int d = static_cast<int>(m.xbar.size());
          return {m.xbar, MatrixXd::Identity(d, d)};
        } else if constexpr (std::is_same_v<T, FullLinearModel>) {
          return {m.mu, m.sigma};
        } else if constexpr (std::is_same_v<T, SubspaceModel>) {
          const MatrixXd& a = m.basis.matrix();
          return {m.basis.project(m.xbar_w), a * a.transpose()};
        } else {
          return {m.xbar_w, m.sigma0};
        }
      },
      v_);
}

LinearScoreModel fit_mean_only(const Dataset& data) {
  if (data.n() < 1) throw std::invalid_argument("fit_mean_only: empty dataset");
  return LinearScoreModel(MeanOnlyModel{data.samples.colwise().mean()});
}

LinearScoreModel fit_full_linear(const Dataset& data) {
  if (data.n() < 2)
    throw std::invalid_argument("fit_full_linear: need n >= 2 for a covariance");
  const GaussianDist stats = empirical_stats(data);
  FullLinearModel m{stats.mean, stats.cov, make_spectral_cache(stats.cov)};
  return LinearScoreModel(std::move(m));
}

LinearScoreModel fit_subspace(const Dataset& data,
                              const std::vector<double>* weights) {
  const int n = data.n();
  if (n < 1) throw std::invalid_argument("fit_subspace: empty dataset");
  if (weights && static_cast<int>(weights->size()) != n)
    throw std::invalid_argument("fit_subspace: weights length must equal n");

  VectorXd xbar;
  if (weights) {
    const double total = weighted_sum(*weights);
    xbar = VectorXd::Zero(data.dim());
    for (int i = 0; i < n; ++i)
      xbar += (*weights)[i] * data.samples.row(i).transpose();
    xbar /= total;
  } else {
    xbar = data.samples.colwise().mean();
  }

  const MatrixXd centered = data.samples.rowwise() - data.samples.colwise().mean();
  if (data.basis) {
    // Assumption: the empirical latent covariance must be full rank.
    Eigen::JacobiSVD<MatrixXd> svd(centered * data.basis->matrix());
    const VectorXd sv = svd.singularValues();
    if (sv.size() < data.basis->latent_dim() ||
        sv(sv.size() - 1) <= kRankTol * sv(0))
      throw std::invalid_argument(
          "fit_subspace: centered samples are rank deficient in the latent space");
    return LinearScoreModel(SubspaceModel{*data.basis, std::move(xbar)});
  }

  Eigen::JacobiSVD<MatrixXd> svd(centered, Eigen::ComputeThinV);
  const VectorXd sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0)
    throw std::invalid_argument("fit_subspace: centered samples have rank 0");
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > kRankTol * sv(0)) ++rank;
  SubspaceBasis basis(svd.matrixV().leftCols(rank));
  return LinearScoreModel(SubspaceModel{std::move(basis), std::move(xbar)});
}

LinearScoreModel fit_frozen_cov(const Dataset& data) {
  if (data.n() < 2)
    throw std::invalid_argument("fit_frozen_cov: need n >= 2 for a covariance");
  const GaussianDist stats = empirical_stats(data);
  FrozenCovModel m{stats.mean, stats.cov, make_spectral_cache(stats.cov),
                   stats.mean};
  return LinearScoreModel(std::move(m));
}

LinearScoreModel refit_bias_frozen(const LinearScoreModel& model,
                                   const VectorXd& weighted_mean) {
  if (!weighted_mean.allFinite())
    throw std::invalid_argument("refit_bias_frozen: weighted mean not finite");
  if (const auto* m = std::get_if<FrozenCovModel>(&model.variant())) {
    FrozenCovModel out = *m;
    out.xbar_w = weighted_mean;
    return LinearScoreModel(std::move(out));
  }
  if (const auto* m = std::get_if<SubspaceModel>(&model.variant())) {
    SubspaceModel out = *m;
    out.xbar_w = weighted_mean;
    return LinearScoreModel(std::move(out));
  }
  throw std::invalid_argument(
      "refit_bias_frozen: model must be frozen_cov or subspace");
}

ScoreDecomposition decompose(const LinearScoreModel& model, const VectorXd& x,
                             double t, const NoiseSchedule& sched) {
  const auto* m = std::get_if<SubspaceModel>(&model.variant());
  if (!m) throw std::invalid_argument("decompose: model must be the subspace variant");
  const double h = sched.h(t);
  if (h == 0.0) throw std::domain_error("decompose: need t > 0");
  ScoreDecomposition d;
  d.orthogonal = -(x - m->basis.project(x)) / h;
  d.on_support = model.evaluate(x, t, sched) - d.orthogonal;
  return d;
}

namespace {

void write_vector(std::ostream& os, const char* name, const VectorXd& v) {
  os << name << " " << v.size() << "\n";
  for (int i = 0; i < v.size(); ++i) {
    if (i) os << " ";
    os << v(i);
  }
  os << "\n";
}

void write_matrix(std::ostream& os, const char* name, const MatrixXd& m) {
  os << name << " " << m.rows() << " " << m.cols() << "\n";
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) os << " ";
      os << m(i, j);
    }
    os << "\n";
  }
}

VectorXd read_vector(std::istream& is, const std::string& expect) {
  std::string name;
  int n = 0;
  is >> name >> n;
  if (name != expect) throw std::runtime_error("model file: expected " + expect);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) is >> v(i);
  return v;
}

MatrixXd read_matrix(std::istream& is, const std::string& expect) {
  std::string name;
  int r = 0, c = 0;
  is >> name >> r >> c;
  if (name != expect) throw std::runtime_error("model file: expected " + expect);
  MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) is >> m(i, j);
  return m;
}

}  // namespace

void save_model(const std::string& path, const LinearScoreModel& model) {
  std::ostringstream os;
  os.precision(17);
  os << "score_model " << model.kind_name() << "\n";
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MeanOnlyModel>) {
          write_vector(os, "xbar", m.xbar);
        } else if constexpr (std::is_same_v<T, FullLinearModel>) {
          write_vector(os, "mu", m.mu);
          write_matrix(os, "sigma", m.sigma);
        } else if constexpr (std::is_same_v<T, SubspaceModel>) {
          write_matrix(os, "basis", m.basis.matrix());
          write_vector(os, "xbar_w", m.xbar_w);
        } else {
          write_vector(os, "mu0", m.mu0);
          write_matrix(os, "sigma0", m.sigma0);
          write_vector(os, "xbar_w", m.xbar_w);
        }
      },
      model.variant());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("save_model: cannot open " + path);
  f << os.str();
}

LinearScoreModel load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_model: cannot open " + path);
  std::string tag, kind;
  f >> tag >> kind;
  if (tag != "score_model") throw std::runtime_error("load_model: bad header");
  if (kind == "mean_only") {
    return LinearScoreModel(MeanOnlyModel{read_vector(f, "xbar")});
  }
  if (kind == "full_linear") {
    VectorXd mu = read_vector(f, "mu");
    MatrixXd sigma = read_matrix(f, "sigma");
    FullLinearModel m{std::move(mu), sigma, make_spectral_cache(sigma)};
    return LinearScoreModel(std::move(m));
  }
  if (kind == "subspace") {
    MatrixXd a = read_matrix(f, "basis");
    VectorXd xbar = read_vector(f, "xbar_w");
    return LinearScoreModel(SubspaceModel{SubspaceBasis(a), std::move(xbar)});
  }
  if (kind == "frozen_cov") {
    VectorXd mu0 = read_vector(f, "mu0");
    MatrixXd sigma0 = read_matrix(f, "sigma0");
    VectorXd xbar = read_vector(f, "xbar_w");
    FrozenCovModel m{std::move(mu0), sigma0, make_spectral_cache(sigma0),
                     std::move(xbar)};
    return LinearScoreModel(std::move(m));
  }
  throw std::runtime_error("load_model: unknown kind '" + kind + "'");
}

}  // namespace gdopt
