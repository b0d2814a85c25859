#pragma once

#include <optional>
#include <variant>

#include "gdopt/dataset.hpp"

namespace gdopt {

/// f(x) = g' x
struct LinearObjective {
  VectorXd g;
};

/// f(x) = c - (theta' x - a)^2
struct QuadScalarObjective {
  VectorXd theta;
  double a = 3.0;
  double c = 10.0;
};

/// f(x) = c0 - w ||x - b||. Concave but not smooth at x = b.
struct DistNormObjective {
  VectorXd b;
  double c0 = 5.0;
  double w = 0.5;
};

class Objective {
 public:
  using Variant = std::variant<LinearObjective, QuadScalarObjective, DistNormObjective>;

  explicit Objective(Variant v) : v_(std::move(v)) {}

  const Variant& variant() const { return v_; }
  int dim() const;

  double value(const VectorXd& x) const;
  VectorXd grad(const VectorXd& x) const;

  bool is_smooth() const;
  /// Euclidean smoothness constant L (0 for linear, 2||theta||^2 for the
  /// scalar quadratic). Throws for the non-smooth distance objective.
  double smoothness() const;
  /// Smoothness w.r.t. the Sigma^{-1} semi-norm: ||grad f(x)-grad f(y)||_Sigma
  /// <= L ||x-y||_{Sigma^{-1}}. For the scalar quadratic this is
  /// 2 theta' Sigma theta. Step-size rules use this constant.
  double smoothness_adapted(const GaussianDist& stats) const;

 private:
  Variant v_;
};

/// argmax f(x) - (lambda/2) ||x - mu||^2_{Sigma^{-1}} with the Moore-Penrose
/// inverse on the span of Sigma; deviations off the span are constrained to
/// zero. With a basis the search is restricted to Span(A) and anchored at
/// AA' mu. Linear and quadratic objectives use closed forms; the distance
/// objective falls back to projected preconditioned ascent
/// (gradient-norm tolerance 1e-10).
VectorXd regularized_opt(const Objective& obj, const GaussianDist& stats,
                         double lambda, const SubspaceBasis* basis = nullptr);

struct SpanOptimum {
  VectorXd x;
  double f_star;
};

/// max { f(x) : x in Span(A) }. Throws when unbounded above (linear f with
/// AA'g != 0). The quadratic returns its minimum-norm maximizer.
SpanOptimum span_opt(const Objective& obj, const SubspaceBasis& basis);

/// Same maximization over the whole space (identity basis).
SpanOptimum global_opt(const Objective& obj, int dim);

/// theta (or g) built from a parallel/orthogonal split with a prescribed
/// off/on-support norm ratio; on_norm scales the on-support part.
VectorXd make_split_direction(const SubspaceBasis& basis, double on_norm,
                              double off_on_ratio, std::uint64_t seed);

}  // namespace gdopt
