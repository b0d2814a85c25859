#pragma once

#include "gdopt/dataset.hpp"
#include "gdopt/schedule.hpp"
#include "gdopt/score.hpp"

namespace gdopt {

enum class GuidanceKind { Loss, Naive, None };

struct BetaRule {
  enum class Kind { GaussianTheory, SubspaceTheory, Constant };
  Kind kind = Kind::GaussianTheory;
  double c = 1.0;  // Constant only

  static BetaRule gaussian_theory() { return {Kind::GaussianTheory, 0.0}; }
  static BetaRule subspace_theory() { return {Kind::SubspaceTheory, 0.0}; }
  static BetaRule constant(double c) { return {Kind::Constant, c}; }
};

struct GuidanceSpec {
  GuidanceKind kind = GuidanceKind::None;
  VectorXd g;        // current objective gradient
  double y = 0.0;    // target value
  double sigma = 1.0;
  BetaRule beta_rule;
};

/// Strength schedule beta(t).
///
/// GaussianTheory: 1/(2 beta) = sigma^2 + h sum_i w_i^2 lam_i / (alpha^2 lam_i + h)
///   with w = U^T g from the model's covariance spectrum. This is the
///   Woodbury form of 1/(2b) = sigma^2 + g' (Sigma^{-1} + (alpha^2/h) I)^{-1} g,
///   valid for singular Sigma.
/// SubspaceTheory: 1/(2 beta) = sigma^2 + h g' AA' g (subspace variant only).
/// Constant: beta = c.
double beta(const GuidanceSpec& spec, const LinearScoreModel& model, double t,
            const NoiseSchedule& sched);

/// Look-ahead-loss guidance
///   G_loss = 2 beta(t) (y - g' E[x0|x_t]) J(t)' g,
/// the gradient of -beta (y - g' E[x0|x_t])^2 in x_t.
VectorXd g_loss(const GuidanceSpec& spec, const LinearScoreModel& model,
                const VectorXd& x_t, double t, const NoiseSchedule& sched);

/// Residual-scaled raw gradient, no Jacobian projection:
///   G = beta(t) (y - g' E[x0|x_t]) g.
VectorXd g_naive(const GuidanceSpec& spec, const LinearScoreModel& model,
                 const VectorXd& x_t, double t, const NoiseSchedule& sched);

/// gamma * s(x_t, t) + guidance term per spec.kind. gamma is a temperature
/// knob (> 1/2); the default 1 is what both optimization algorithms use.
VectorXd guided_score(const GuidanceSpec& spec, const LinearScoreModel& model,
                      const VectorXd& x_t, double t, const NoiseSchedule& sched,
                      double gamma = 1.0);

/// Target value that moves the analytic posterior mean by one preconditioned
/// gradient step of size eta:
///   y = eta (sigma^2 + g' Sigma g) + g' mu
/// with (mu, Sigma) the model's implied Gaussian.
double target_y(const LinearScoreModel& model, const VectorXd& g, double sigma,
                double eta);

}  // namespace gdopt
