#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gdopt/dataset.hpp"
#include "gdopt/guidance.hpp"
#include "gdopt/sampler.hpp"
#include "gdopt/schedule.hpp"
#include "gdopt/score.hpp"

namespace gdopt {

struct CheckReport {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string note;          // which identity the check certifies
  double z_score = 0.0;      // for statistical checks; 0 otherwise
};

struct VerifyOptions {
  std::uint64_t seed = 2024;
  int threads = 1;
  bool quick = false;  // smaller Monte Carlo sizes for unit-test runs
};

/// Exact expected score-matching loss at fixed t for the affine score
/// s(x) = C x + b under x_t | x_0 ~ N(alpha x_0, h I) and the empirical
/// distribution of data:
///   L_t(C, b) = h ||C + I/h||_F^2 + (1/n) sum_i ||alpha C x_i + b||^2.
/// Evaluates any (C, b) directly from Gaussian moments, independent of the
/// closed-form fits it is used to certify.
double score_match_loss(const MatrixXd& c, const VectorXd& b, const Dataset& data,
                        double t, const NoiseSchedule& sched);

/// Conditional score of N(mu, Sigma) data with a linear observation
/// y = g'x + eps, computed by direct Gaussian conditioning and a dense
/// solve. Reference route, independent of the guidance code path.
VectorXd conditional_score_reference(const GaussianDist& stats, const VectorXd& g,
                                     double sigma, double y, const VectorXd& x,
                                     double t, const NoiseSchedule& sched);

/// Exact terminal standard deviation of the orthogonal component of the
/// backward process stopped at forward time eps (per orthogonal dimension),
/// by quadrature of the linear-SDE solution under q(t) = 1.
double orthogonal_terminal_std(double T, double eps, int panels = 4096);

// Individual checks. Each names the identity it certifies in its note.
CheckReport check_conditional_score(const GaussianDist& stats, double sigma,
                                    const NoiseSchedule& sched, int trials,
                                    std::uint64_t seed);
CheckReport check_conditional_score_negative(const GaussianDist& stats, double sigma,
                                             const NoiseSchedule& sched, int trials,
                                             std::uint64_t seed);
CheckReport check_posterior_distribution(const LinearScoreModel& model,
                                         const GuidanceSpec& spec,
                                         const SamplerConfig& cfg,
                                         const NoiseSchedule& sched,
                                         const std::string& name);
CheckReport check_subspace_confinement(const LinearScoreModel& model,
                                       const GuidanceSpec& spec,
                                       const SamplerConfig& cfg,
                                       const NoiseSchedule& sched);
CheckReport check_faithfulness(const SubspaceBasis& basis,
                               const LinearScoreModel& model, int trials,
                               std::uint64_t seed, const NoiseSchedule& sched);
CheckReport check_naive_direction_negative(const SubspaceBasis& basis,
                                           const LinearScoreModel& model,
                                           const NoiseSchedule& sched,
                                           std::uint64_t seed);
CheckReport check_naive_failure(double b0, const std::vector<double>& horizons);
CheckReport check_score_decomposition(const LinearScoreModel& model, int trials,
                                      std::uint64_t seed, const NoiseSchedule& sched);
CheckReport check_fit_optimality(std::uint64_t seed);
CheckReport check_convergence_alg1(std::uint64_t seed);
CheckReport check_convergence_alg2(std::uint64_t seed);

/// The full oracle suite on the default configuration. Deterministic under
/// the master seed; reports are merged sorted by name.
std::vector<CheckReport> run_all_checks(const VerifyOptions& opts);

std::string report_csv(const std::vector<CheckReport>& reports);
void print_report(std::ostream& os, const std::vector<CheckReport>& reports);
bool all_pass(const std::vector<CheckReport>& reports);

}  // namespace gdopt
