#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gdopt/guidance.hpp"
#include "gdopt/objective.hpp"
#include "gdopt/sampler.hpp"
#include "gdopt/score.hpp"

namespace gdopt {

struct BatchSchedule {
  enum class Kind { Constant, Geometric };
  Kind kind = Kind::Constant;
  int constant = 512;
  int b0 = 256;
  double ratio = 4.0;
  int cap = 65536;

  static BatchSchedule constant_size(int b) { return {Kind::Constant, b, 256, 4.0, 65536}; }
  static BatchSchedule geometric(int b0, double ratio, int cap = 65536) {
    return {Kind::Geometric, 512, b0, ratio, cap};
  }

  int size(int round) const;
};

struct Alg2Options {
  enum class EtaRule { TwoOverLplus2Lambda, Explicit };
  enum class LambdaRule { LLogKover4K, Explicit };
  EtaRule eta_rule = EtaRule::TwoOverLplus2Lambda;
  double eta = 0.0;  // Explicit only
  LambdaRule lambda_rule = LambdaRule::Explicit;
  double lambda = 0.01;  // Explicit only
};

struct OptConfig {
  int rounds = 50;          // K guided rounds after the unguided baseline
  double lambda = 2.0;      // regularization; step size for Alg. 1 is 1/lambda
  BatchSchedule batch;
  double sigma = 1.0;
  BetaRule beta_rule = BetaRule::gaussian_theory();
  bool exact_mean = false;  // replace sampling with the analytic posterior mean
  SampleMode mode = SampleMode::AnalyticOracle;
  double T = 10.0;
  int n_steps = 200;
  int threads = 1;
  Alg2Options alg2;
};

struct RoundRecord {
  int k = 0;
  VectorXd z_bar;
  VectorXd g;
  double y = 0.0;
  double f_value = 0.0;
  double gap_to_opt = 0.0;     // f(x*) - f(z_bar), signed
  double off_support = 0.0;    // mean per-sample ratio; ratio of z_bar in exact-mean mode
  double g_norm = 0.0;
  int batch_size = 0;
};

struct OptRunState {
  LinearScoreModel model;  // final model (Alg. 1 never changes it)
  std::vector<RoundRecord> history;
  VectorXd x_star;
  double f_star = 0.0;
};

/// Guidance-only generative optimization. Round 0 samples unguided, rounds
/// 1..K sample with the look-ahead-loss guidance built from the previous
/// round's batch-mean gradient; the score model is never modified. The
/// target sequence is y_k = target_y(model, g_k, sigma, 1/lambda).
OptRunState run_alg1(const LinearScoreModel& model, const Objective& obj,
                     const OptConfig& cfg, const NoiseSchedule& sched,
                     std::uint64_t seed);

/// Adaptive fine-tuning: after each round the score bias is refit to the
/// two-point weighted mean (1 - w) mu0 + w z_bar_k with w = 1 - eta*lambda;
/// C_t stays frozen. eta = 2/(L + 2 lambda) and lambda = L log(K)/(4K)
/// under the default rules. Requires a frozen-covariance or subspace model.
OptRunState run_alg2(const LinearScoreModel& model, const Objective& obj,
                     const OptConfig& cfg, const NoiseSchedule& sched,
                     std::uint64_t seed);

/// Deterministic mean iterates (batch -> infinity): the z_bar sequence of the
/// corresponding run with exact_mean forced on. Same code path as the runs.
std::vector<VectorXd> exact_mean_recursion(const LinearScoreModel& model,
                                           const Objective& obj,
                                           const OptConfig& cfg,
                                           const NoiseSchedule& sched,
                                           int which_alg);

/// Trajectory CSV body: one row per round with the fixed column set
/// k, f_zbar, gap_to_x_star, off_support_ratio, y_k, g_norm, batch_size.
std::string trajectory_csv(const OptRunState& state);

}  // namespace gdopt
