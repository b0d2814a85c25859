#include "gdopt/objective.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "gdopt/rng.hpp"

namespace gdopt {

int Objective::dim() const {
  return std::visit(
      [](const auto& o) -> int {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, LinearObjective>)
          return static_cast<int>(o.g.size());
        else if constexpr (std::is_same_v<T, QuadScalarObjective>)
          return static_cast<int>(o.theta.size());
        else
          return static_cast<int>(o.b.size());
      },
      v_);
}

double Objective::value(const VectorXd& x) const {
  return std::visit(
      [&](const auto& o) -> double {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, LinearObjective>) {
          return o.g.dot(x);
        } else if constexpr (std::is_same_v<T, QuadScalarObjective>) {
          const double r = o.theta.dot(x) - o.a;
          return o.c - r * r;
        } else {
          return o.c0 - o.w * (x - o.b).norm();
        }
      },
      v_);
}

VectorXd Objective::grad(const VectorXd& x) const {
  return std::visit(
      [&](const auto& o) -> VectorXd {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, LinearObjective>) {
          return o.g;
        } else if constexpr (std::is_same_v<T, QuadScalarObjective>) {
          return (-2.0 * (o.theta.dot(x) - o.a)) * o.theta;
        } else {
          const VectorXd diff = x - o.b;
          const double norm = diff.norm();
          if (norm == 0.0)
            throw std::domain_error("grad: distance objective undefined at x = b");
          return (-o.w / norm) * diff;
        }
      },
      v_);
}

bool Objective::is_smooth() const {
  return !std::holds_alternative<DistNormObjective>(v_);
}

double Objective::smoothness() const {
  return std::visit(
      [](const auto& o) -> double {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, LinearObjective>) {
          (void)o;
          return 0.0;
        } else if constexpr (std::is_same_v<T, QuadScalarObjective>) {
          return 2.0 * o.theta.squaredNorm();
        } else {
          throw std::domain_error("smoothness: distance objective is not smooth");
        }
      },
      v_);
}

double Objective::smoothness_adapted(const GaussianDist& stats) const {
  return std::visit(
      [&](const auto& o) -> double {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, LinearObjective>) {
          (void)o;
          return 0.0;
        } else if constexpr (std::is_same_v<T, QuadScalarObjective>) {
          return 2.0 * o.theta.dot(stats.cov * o.theta);
        } else {
          throw std::domain_error("smoothness: distance objective is not smooth");
        }
      },
      v_);
}

namespace {

struct SpanFrame {
  MatrixXd b;      // D x r, orthonormal columns of the working span
  MatrixXd s_lat;  // r x r, B' Sigma B (PD on the frame)
  VectorXd anchor; // anchored mean
};

// Working frame for the regularizer: range of Sigma, intersected with the
// basis when supplied.
SpanFrame make_frame(const GaussianDist& stats, double lambda,
                     const SubspaceBasis* basis) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("regularized_opt: lambda must be positive");
  SpanFrame fr;
  if (basis) {
    fr.b = basis->matrix();
    fr.anchor = basis->project(stats.mean);
  } else {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(stats.cov);
    const VectorXd lam = es.eigenvalues();
    const double tol = 1e-10 * std::max(1.0, lam.cwiseAbs().maxCoeff());
    int rank = 0;
    for (int i = 0; i < lam.size(); ++i)
      if (lam(i) > tol) ++rank;
    if (rank == 0)
      throw std::invalid_argument("regularized_opt: covariance has rank 0");
    fr.b = es.eigenvectors().rightCols(rank);
    fr.anchor = stats.mean;
  }
  fr.s_lat = fr.b.transpose() * stats.cov * fr.b;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(fr.s_lat);
  if (es.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()))
    throw std::invalid_argument(
        "regularized_opt: covariance is singular on the working span");
  return fr;
}

}  // namespace

VectorXd regularized_opt(const Objective& obj, const GaussianDist& stats,
                         double lambda, const SubspaceBasis* basis) {
  const SpanFrame fr = make_frame(stats, lambda, basis);
  const MatrixXd sigma_eff = fr.b * fr.s_lat * fr.b.transpose();

  if (const auto* lin = std::get_if<LinearObjective>(&obj.variant())) {
    return fr.anchor + (sigma_eff * lin->g) / lambda;
  }
  if (const auto* quad = std::get_if<QuadScalarObjective>(&obj.variant())) {
    // Stationarity collapses to one scalar equation in r = theta' x - a.
    const double tst = quad->theta.dot(sigma_eff * quad->theta);
    const double r = (quad->theta.dot(fr.anchor) - quad->a) / (1.0 + 2.0 * tst / lambda);
    return fr.anchor - (2.0 * r / lambda) * (sigma_eff * quad->theta);
  }

  // Projected preconditioned ascent on
  //   F(w) = f(anchor + B w) - (lambda/2) w' S^{-1} w.
  const Eigen::LLT<MatrixXd> s_llt(fr.s_lat);
  VectorXd w = VectorXd::Zero(fr.b.cols());
  double step = 1.0 / (lambda + 1.0);
  double best = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 200000; ++iter) {
    const VectorXd x = fr.anchor + fr.b * w;
    const VectorXd gf = fr.b.transpose() * obj.grad(x);
    const VectorXd grad_lat = gf - lambda * s_llt.solve(w);
    if (grad_lat.norm() < 1e-10) return x;
    const double fv = obj.value(x) - 0.5 * lambda * w.dot(s_llt.solve(w));
    if (fv < best - 1e-14) step *= 0.5;
    best = std::max(best, fv);
    w += step * (fr.s_lat * grad_lat);
  }
  throw std::runtime_error("regularized_opt: ascent did not reach tolerance");
}

SpanOptimum span_opt(const Objective& obj, const SubspaceBasis& basis) {
  if (const auto* lin = std::get_if<LinearObjective>(&obj.variant())) {
    const VectorXd g_par = basis.project(lin->g);
    if (g_par.norm() > 1e-12 * std::max(1.0, lin->g.norm()))
      throw std::runtime_error("span_opt: linear objective unbounded above on the span");
    return {VectorXd::Zero(obj.dim()), 0.0};
  }
  if (const auto* quad = std::get_if<QuadScalarObjective>(&obj.variant())) {
    const VectorXd theta_par = basis.project(quad->theta);
    if (theta_par.norm() <= 1e-12 * std::max(1.0, quad->theta.norm())) {
      // constant c - a^2 on the span
      return {VectorXd::Zero(obj.dim()), quad->c - quad->a * quad->a};
    }
    return {(quad->a / theta_par.squaredNorm()) * theta_par, quad->c};
  }
  const auto& dist = std::get<DistNormObjective>(obj.variant());
  const VectorXd x = basis.project(dist.b);
  return {x, dist.c0 - dist.w * (dist.b - x).norm()};
}

SpanOptimum global_opt(const Objective& obj, int dim) {
  return span_opt(obj, SubspaceBasis(MatrixXd::Identity(dim, dim)));
}

VectorXd make_split_direction(const SubspaceBasis& basis, double on_norm,
                              double off_on_ratio, std::uint64_t seed) {
  if (!(on_norm > 0.0))
    throw std::invalid_argument("make_split_direction: on_norm must be positive");
  if (off_on_ratio < 0.0)
    throw std::invalid_argument("make_split_direction: ratio must be nonnegative");
  const int d = basis.ambient_dim();
  Rng rng(Rng::stream(seed, 1));
  VectorXd v1(d), v2(d);
  for (int i = 0; i < d; ++i) v1(i) = rng.normal();
  for (int i = 0; i < d; ++i) v2(i) = rng.normal();
  VectorXd on = basis.project(v1);
  if (on.norm() == 0.0)
    throw std::runtime_error("make_split_direction: degenerate on-support draw");
  on.normalize();
  VectorXd theta = on_norm * on;
  if (off_on_ratio > 0.0) {
    VectorXd off = v2 - basis.project(v2);
    if (off.norm() == 0.0)
      throw std::runtime_error("make_split_direction: span is the whole space");
    off.normalize();
    theta += on_norm * off_on_ratio * off;
  }
  return theta;
}

}  // namespace gdopt
