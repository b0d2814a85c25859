#include <benchmark/benchmark.h>

#include "gdopt/guidance.hpp"
#include "gdopt/rng.hpp"
#include "gdopt/sampler.hpp"
#include "gdopt/score.hpp"

using namespace gdopt;

namespace {

const NoiseSchedule& sched() {
  static const NoiseSchedule s = NoiseSchedule::constant(1.0, 10.0);
  return s;
}

LinearScoreModel full_model(int dim) {
  Rng rng(3);
  MatrixXd root(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < dim; ++i) root(i, j) = rng.normal();
  MatrixXd sigma = root * root.transpose() / dim + 0.2 * MatrixXd::Identity(dim, dim);
  VectorXd mu(dim);
  for (int i = 0; i < dim; ++i) mu(i) = rng.normal();
  return LinearScoreModel(FullLinearModel{mu, sigma, make_spectral_cache(sigma)});
}

LinearScoreModel subspace_model(int dim, int lat) {
  const SubspaceBasis basis = random_orthonormal_basis(dim, lat, 5);
  return fit_subspace(generate_subspace(basis, LatentSpec::std_normal(), 4096, 6));
}

VectorXd random_vec(int dim, std::uint64_t seed) {
  Rng rng(seed);
  VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.normal();
  return v;
}

void BM_ScheduleAlphaH(benchmark::State& state) {
  const NoiseSchedule tab =
      NoiseSchedule::tabulated({{0.0, 0.5}, {5.0, 1.5}, {10.0, 1.0}}, 10.0);
  double t = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tab.alpha_h(t));
    t += 0.37;
    if (t > 10.0) t -= 10.0;
  }
}
BENCHMARK(BM_ScheduleAlphaH);

void BM_ScoreEvaluateFullLinear(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const LinearScoreModel m = full_model(dim);
  const VectorXd x = random_vec(dim, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(m.evaluate(x, 1.3, sched()));
  }
}
BENCHMARK(BM_ScoreEvaluateFullLinear)->Arg(8)->Arg(64);

void BM_ScoreEvaluateSubspace(benchmark::State& state) {
  const LinearScoreModel m = subspace_model(64, 16);
  const VectorXd x = random_vec(64, 9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(m.evaluate(x, 1.3, sched()));
  }
}
BENCHMARK(BM_ScoreEvaluateSubspace);

void BM_GuidedScore(benchmark::State& state) {
  const LinearScoreModel m = subspace_model(64, 16);
  GuidanceSpec spec;
  spec.kind = GuidanceKind::Loss;
  spec.g = random_vec(64, 11);
  spec.y = 2.0;
  spec.sigma = 1.0;
  spec.beta_rule = BetaRule::subspace_theory();
  const VectorXd x = random_vec(64, 13);
  for (auto _ : state) {
    benchmark::DoNotOptimize(guided_score(spec, m, x, 1.3, sched()));
  }
}
BENCHMARK(BM_GuidedScore);

void BM_BackwardSampleTrajectory(benchmark::State& state) {
  const LinearScoreModel m = subspace_model(64, 16);
  GuidanceSpec spec;
  spec.kind = GuidanceKind::Loss;
  spec.g = random_vec(64, 11);
  spec.y = 2.0;
  spec.sigma = 1.0;
  spec.beta_rule = BetaRule::subspace_theory();
  SamplerConfig cfg{10.0, 200, 1, 17, SampleMode::Sde, 1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(backward_sample(m, spec, cfg, sched()));
    ++cfg.seed;
  }
}
BENCHMARK(BM_BackwardSampleTrajectory);

void BM_OracleSample(benchmark::State& state) {
  const LinearScoreModel m = full_model(64);
  const GaussianDist stats = m.implied_stats();
  std::uint64_t seed = 23;
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle_sample(stats, 64, seed++));
  }
}
BENCHMARK(BM_OracleSample);

void BM_FitFullLinear(benchmark::State& state) {
  const SubspaceBasis basis = random_orthonormal_basis(64, 16, 29);
  const Dataset data = generate_subspace(basis, LatentSpec::std_normal(), 8192, 31);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_full_linear(data));
  }
}
BENCHMARK(BM_FitFullLinear);

}  // namespace

BENCHMARK_MAIN();
