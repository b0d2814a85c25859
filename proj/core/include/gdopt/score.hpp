#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gdopt/dataset.hpp"
#include "gdopt/schedule.hpp"

namespace gdopt {

/// Eigendecomposition of a covariance, computed once at fit time. Every
/// per-t evaluation then reduces to a diagonal shift, O(D^2) per call.
struct SpectralCache {
  MatrixXd u;     // orthonormal eigenvectors
  VectorXd lam;   // eigenvalues, clamped to >= 0
  double min_lam = 0.0;
};

SpectralCache make_spectral_cache(const MatrixXd& cov);

/// s(x, t) = -x + alpha(t) xbar
struct MeanOnlyModel {
  VectorXd xbar;
};

/// s(x, t) = -(alpha^2 Sigma + h I)^{-1} (x - alpha mu)
struct FullLinearModel {
  VectorXd mu;
  MatrixXd sigma;
  SpectralCache cache;
};

/// s(x, t) = AA^T(-x + alpha xbar_w) + (1/h) AA^T x - (1/h) x
struct SubspaceModel {
  SubspaceBasis basis;
  VectorXd xbar_w;
};

/// Same closed form as FullLinear but the covariance (hence C_t) is frozen
/// at its pretraining value; only the bias mean xbar_w is ever refit.
struct FrozenCovModel {
  VectorXd mu0;      // pretraining mean, kept for reference
  MatrixXd sigma0;   // pretraining covariance, fixes C_t
  SpectralCache cache;
  VectorXd xbar_w;   // current weighted mean
};

struct ScoreDecomposition {
  VectorXd on_support;  // in Span(A)
  VectorXd orthogonal;  // perpendicular to Span(A)
};

class LinearScoreModel {
 public:
  using Variant =
      std::variant<MeanOnlyModel, FullLinearModel, SubspaceModel, FrozenCovModel>;

  explicit LinearScoreModel(Variant v) : v_(std::move(v)) {}

  const Variant& variant() const { return v_; }
  int dim() const;
  std::string kind_name() const;

  VectorXd evaluate(const VectorXd& x, double t, const NoiseSchedule& sched) const;

  /// Look-ahead estimator E[x0 | x_t] = (x_t + h(t) s(x_t, t)) / alpha(t).
  VectorXd tweedie_mean(const VectorXd& x, double t, const NoiseSchedule& sched) const;

  /// State-independent Jacobian of the look-ahead estimator,
  /// J(t) = (1/alpha)(I + h C_t).
  MatrixXd tweedie_jacobian(double t, const NoiseSchedule& sched) const;

  /// J(t)^T g without forming the D x D matrix.
  VectorXd tweedie_jacobian_apply(const VectorXd& g, double t,
                                  const NoiseSchedule& sched) const;

  /// Affine form s(x, t) = C x + b at a fixed time.
  std::pair<MatrixXd, VectorXd> affine_coeffs(double t, const NoiseSchedule& sched) const;

  /// The Gaussian the model represents: mean and covariance of the
  /// distribution whose exact score the model evaluates.
  GaussianDist implied_stats() const;

  const SubspaceBasis* basis() const;

 private:
  Variant v_;
};

LinearScoreModel fit_mean_only(const Dataset& data);
LinearScoreModel fit_full_linear(const Dataset& data);

/// Basis taken from the dataset when present, otherwise recovered as the
/// rank-d column space of the centered samples (singular values below
/// 1e-8 x largest treated as zero). Weights, when given, must be positive
/// and of length n; they produce the weighted mean xbar_w.
LinearScoreModel fit_subspace(const Dataset& data,
                              const std::vector<double>* weights = nullptr);

LinearScoreModel fit_frozen_cov(const Dataset& data);

/// Returns the same model with the bias mean replaced; C_t untouched.
/// Accepts FrozenCov and Subspace variants.
LinearScoreModel refit_bias_frozen(const LinearScoreModel& model,
                                   const VectorXd& weighted_mean);

/// Splits a Subspace-variant score into its on-support and orthogonal parts:
/// orthogonal = -(1/h)(I - AA^T) x, on_support = s - orthogonal.
ScoreDecomposition decompose(const LinearScoreModel& model, const VectorXd& x,
                             double t, const NoiseSchedule& sched);

void save_model(const std::string& path, const LinearScoreModel& model);
LinearScoreModel load_model(const std::string& path);

}  // namespace gdopt
