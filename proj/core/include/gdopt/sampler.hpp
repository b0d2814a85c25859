#pragma once

#include <cstdint>
#include <vector>

#include "gdopt/dataset.hpp"
#include "gdopt/guidance.hpp"
#include "gdopt/schedule.hpp"
#include "gdopt/score.hpp"

namespace gdopt {

enum class SampleMode { Sde, AnalyticOracle };

struct SamplerConfig {
  double T = 10.0;
  int n_steps = 200;
  int batch = 512;
  std::uint64_t seed = 0;
  SampleMode mode = SampleMode::Sde;
  int threads = 1;
};

struct SampleBatch {
  MatrixXd samples;  // batch x D
  SamplerConfig config;
  std::vector<std::uint64_t> streams;  // per-sample RNG stream ids

  VectorXd mean() const { return samples.colwise().mean(); }
};

/// Euler-Maruyama on dX = [X/2 + guided_score(X, T - t)] dt + dW, started at
/// N(0, I_D) on a uniform grid of n_steps. The score is evaluated at the left
/// endpoint of each step, so the forward time never drops below
/// eps = T/n_steps; the last step is the standard denoising mean step and
/// injects no noise. Each trajectory consumes its own RNG stream, making
/// parallel and serial execution identical.
SampleBatch backward_sample(const LinearScoreModel& model, const GuidanceSpec& spec,
                            const SamplerConfig& cfg, const NoiseSchedule& sched);

/// Exact output law of the guided backward process as T -> infinity:
///   mean  = mu + (y - g'mu) / (sigma^2 + g'Sg) * S g
///   cov   = S - S g g' S / (sigma^2 + g'Sg)
GaussianDist analytic_posterior(const GaussianDist& stats, const VectorXd& g,
                                double y, double sigma);

/// Draws from a Gaussian via its eigendecomposition square root.
/// Deterministic per seed; eigenvalues below -1e-10 are an error, small
/// negatives are clipped to zero.
SampleBatch oracle_sample(const GaussianDist& dist, int batch, std::uint64_t seed,
                          int threads = 1);

/// Coefficient C of g in E[X_{T,perp}] for constant naive guidance b0 under
/// the h(t) = 1 - exp(-sqrt(t)) schedule:
///   C = b0 * int_0^T exp(-int_0^t 1/h) e^{t/2} dt.
/// Both integrals are smoothed by the substitution t = u^2 and evaluated by
/// composite trapezoid with `panels` subdivisions of [0, sqrt(T)].
double naive_offsupport_expectation(double b0, double T, int panels);

/// Adaptive version: doubles the resolution until two levels agree to 1e-9.
double naive_offsupport_expectation(double b0, double T);

}  // namespace gdopt
