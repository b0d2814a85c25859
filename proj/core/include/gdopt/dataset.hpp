#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gdopt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Mean + symmetric PSD covariance. Used for empirical statistics, analytic
/// posteriors and the oracle sampler.
struct GaussianDist {
  VectorXd mean;
  MatrixXd cov;

  int dim() const { return static_cast<int>(mean.size()); }
};

/// Throws if cov is not symmetric (1e-10) or has an eigenvalue below -1e-10.
void validate_gaussian(const GaussianDist& g);

/// D x d matrix with orthonormal columns. A^T A = I_d to 1e-10 Frobenius.
class SubspaceBasis {
 public:
  explicit SubspaceBasis(MatrixXd a);

  const MatrixXd& matrix() const { return a_; }
  int ambient_dim() const { return static_cast<int>(a_.rows()); }
  int latent_dim() const { return static_cast<int>(a_.cols()); }

  /// A A^T x
  VectorXd project(const VectorXd& x) const { return a_ * (a_.transpose() * x); }

 private:
  MatrixXd a_;
};

/// QR of a seeded Gaussian D x d matrix, sign-normalized so diag(R) > 0.
/// Bit-identical for identical seeds.
SubspaceBasis random_orthonormal_basis(int ambient_dim, int latent_dim,
                                       std::uint64_t seed);

struct LatentSpec {
  enum class Kind { StdNormal, Gaussian };
  Kind kind = Kind::StdNormal;
  GaussianDist gauss;  // used when kind == Gaussian

  static LatentSpec std_normal() { return {}; }
  static LatentSpec gaussian(GaussianDist g) {
    LatentSpec s;
    s.kind = Kind::Gaussian;
    s.gauss = std::move(g);
    return s;
  }
};

struct Dataset {
  MatrixXd samples;  // n x D, row-major semantics (one sample per row)
  std::optional<SubspaceBasis> basis;
  std::uint64_t seed = 0;

  int n() const { return static_cast<int>(samples.rows()); }
  int dim() const { return static_cast<int>(samples.cols()); }
};

/// Each sample is x = A u with u drawn from the latent law. Deterministic
/// given seed.
Dataset generate_subspace(const SubspaceBasis& basis, const LatentSpec& latent,
                          int n, std::uint64_t seed);

/// Full-rank Gaussian variant (no basis attached).
Dataset generate_gaussian(const GaussianDist& dist, int n, std::uint64_t seed);

/// mean = (1/n) sum x_i; cov = (1/n) sum (x_i - mean)(x_i - mean)^T.
/// The 1/n normalization matches the closed-form score fits.
GaussianDist empirical_stats(const Dataset& data);

/// ||(I - AA^T) x|| / ||AA^T x||. Returns +inf when the on-support part is
/// zero and x is not; throws for x = 0.
double off_support_ratio(const VectorXd& x, const SubspaceBasis& basis);

/// Mean of per-sample ratios over the rows of `samples`.
double mean_off_support_ratio(const MatrixXd& samples, const SubspaceBasis& basis);

void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

}  // namespace gdopt
