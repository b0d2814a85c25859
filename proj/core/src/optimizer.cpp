#include "gdopt/optimizer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "gdopt/csv.hpp"
#include "gdopt/rng.hpp"

namespace gdopt {

int BatchSchedule::size(int round) const {
  if (kind == Kind::Constant) return constant;
  double b = b0 * std::pow(ratio, round);
  if (b > cap) b = cap;
  return static_cast<int>(b);
}

namespace {

double round_off_support(const LinearScoreModel& model, const MatrixXd& samples) {
  const SubspaceBasis* basis = model.basis();
  if (!basis) return 0.0;
  return mean_off_support_ratio(samples, *basis);
}

double zbar_off_support(const LinearScoreModel& model, const VectorXd& z) {
  const SubspaceBasis* basis = model.basis();
  if (!basis || z.norm() == 0.0) return 0.0;
  return off_support_ratio(z, *basis);
}

struct RoundSampler {
  const OptConfig& cfg;
  const NoiseSchedule& sched;
  std::uint64_t seed;

  // z_bar of round k under guidance gs (None for k = 0); fills `ratio` with
  // the batch's mean off-support ratio when a basis is known.
  VectorXd draw(const LinearScoreModel& model, const GuidanceSpec& gs, int k,
                int batch, double* ratio) {
    const GaussianDist stats = model.implied_stats();
    if (cfg.exact_mean) {
      VectorXd mean = (gs.kind == GuidanceKind::None)
                          ? stats.mean
                          : analytic_posterior(stats, gs.g, gs.y, gs.sigma).mean;
      *ratio = zbar_off_support(model, mean);
      return mean;
    }
    if (cfg.mode == SampleMode::AnalyticOracle) {
      const GaussianDist post = (gs.kind == GuidanceKind::None)
                                    ? stats
                                    : analytic_posterior(stats, gs.g, gs.y, gs.sigma);
      const SampleBatch b =
          oracle_sample(post, batch, Rng::stream(seed, k), cfg.threads);
      *ratio = round_off_support(model, b.samples);
      return b.mean();
    }
    SamplerConfig sc;
    sc.T = cfg.T;
    sc.n_steps = cfg.n_steps;
    sc.batch = batch;
    sc.seed = Rng::stream(seed, k);
    sc.threads = cfg.threads;
    const SampleBatch b = backward_sample(model, gs, sc, sched);
    *ratio = round_off_support(model, b.samples);
    return b.mean();
  }
};

RoundRecord make_record(int k, const VectorXd& z, const Objective& obj,
                        double f_star, double y, const VectorXd& g,
                        double ratio, int batch) {
  RoundRecord r;
  r.k = k;
  r.z_bar = z;
  r.g = g;
  r.y = y;
  r.f_value = obj.value(z);
  r.gap_to_opt = f_star - r.f_value;
  r.off_support = ratio;
  r.g_norm = g.norm();
  r.batch_size = batch;
  return r;
}

}  // namespace

OptRunState run_alg1(const LinearScoreModel& model, const Objective& obj,
                     const OptConfig& cfg, const NoiseSchedule& sched,
                     std::uint64_t seed) {
  if (cfg.rounds < 1) throw std::invalid_argument("run_alg1: need rounds >= 1");
  if (!(cfg.sigma > 0.0)) throw std::invalid_argument("run_alg1: sigma must be positive");
  if (!(cfg.lambda > 0.0)) throw std::invalid_argument("run_alg1: lambda must be positive");

  const GaussianDist stats = model.implied_stats();
  if (obj.is_smooth()) {
    const double l = obj.smoothness_adapted(stats);
    if (cfg.lambda <= l)
      std::fprintf(stderr,
                   "run_alg1: warning: lambda = %g does not exceed the smoothness "
                   "constant L = %g; convergence to the regularized optimum is not "
                   "guaranteed\n",
                   cfg.lambda, l);
  }

  OptRunState state{model, {}, {}, 0.0};
  state.x_star = regularized_opt(obj, stats, cfg.lambda, model.basis());
  state.f_star = obj.value(state.x_star);

  const double eta = 1.0 / cfg.lambda;
  RoundSampler sampler{cfg, sched, seed};
  GuidanceSpec gs;  // round 0: unguided
  gs.sigma = cfg.sigma;
  gs.beta_rule = cfg.beta_rule;

  for (int k = 0; k <= cfg.rounds; ++k) {
    double ratio = 0.0;
    const int batch = cfg.batch.size(k);
    VectorXd z = sampler.draw(model, gs, k, batch, &ratio);
    VectorXd g = obj.grad(z);
    const double y = target_y(model, g, cfg.sigma, eta);
    state.history.push_back(make_record(k, z, obj, state.f_star, y, g, ratio, batch));
    gs.kind = GuidanceKind::Loss;
    gs.g = std::move(g);
    gs.y = y;
  }
  return state;
}

OptRunState run_alg2(const LinearScoreModel& model, const Objective& obj,
                     const OptConfig& cfg, const NoiseSchedule& sched,
                     std::uint64_t seed) {
  if (cfg.rounds < 1) throw std::invalid_argument("run_alg2: need rounds >= 1");
  if (!(cfg.sigma > 0.0)) throw std::invalid_argument("run_alg2: sigma must be positive");
  const bool refittable = std::holds_alternative<FrozenCovModel>(model.variant()) ||
                          std::holds_alternative<SubspaceModel>(model.variant());
  if (!refittable)
    throw std::invalid_argument(
        "run_alg2: model must support a frozen-covariance bias refit "
        "(frozen_cov or subspace variant)");

  const GaussianDist stats0 = model.implied_stats();

  double lambda = cfg.alg2.lambda;
  double l_smooth = 0.0;
  const bool needs_l =
      cfg.alg2.lambda_rule == Alg2Options::LambdaRule::LLogKover4K ||
      cfg.alg2.eta_rule == Alg2Options::EtaRule::TwoOverLplus2Lambda;
  if (needs_l) {
    if (!obj.is_smooth())
      throw std::invalid_argument(
          "run_alg2: the default eta/lambda rules need a smooth objective");
    l_smooth = obj.smoothness_adapted(stats0);
  }
  if (cfg.alg2.lambda_rule == Alg2Options::LambdaRule::LLogKover4K)
    lambda = l_smooth * std::log(static_cast<double>(cfg.rounds)) / (4.0 * cfg.rounds);
  if (!(lambda > 0.0)) throw std::invalid_argument("run_alg2: lambda must be positive");

  double eta = cfg.alg2.eta;
  if (cfg.alg2.eta_rule == Alg2Options::EtaRule::TwoOverLplus2Lambda)
    eta = 2.0 / (l_smooth + 2.0 * lambda);
  if (!(eta > 0.0)) throw std::invalid_argument("run_alg2: eta must be positive");

  const double w = 1.0 - eta * lambda;
  if (!(w > 0.0) || !(w < 1.0))
    throw std::invalid_argument(
        "run_alg2: w = 1 - eta*lambda must lie in (0, 1); adjust eta or lambda");

  OptRunState state{model, {}, {}, 0.0};
  try {
    const SubspaceBasis* basis = model.basis();
    const SpanOptimum opt =
        basis ? span_opt(obj, *basis) : global_opt(obj, model.dim());
    state.x_star = opt.x;
    state.f_star = opt.f_star;
  } catch (const std::runtime_error&) {
    // unbounded objective on the span: the run still converges to the
    // fixed point of the recursion, there is just no finite gap to report
    state.x_star = VectorXd::Zero(model.dim());
    state.f_star = std::numeric_limits<double>::quiet_NaN();
  }

  const VectorXd mu0 = stats0.mean;  // pretraining mean, fixed
  RoundSampler sampler{cfg, sched, seed};
  LinearScoreModel current = model;
  GuidanceSpec gs;
  gs.sigma = cfg.sigma;
  gs.beta_rule = cfg.beta_rule;

  for (int k = 0; k <= cfg.rounds; ++k) {
    double ratio = 0.0;
    const int batch = cfg.batch.size(k);
    VectorXd z = sampler.draw(current, gs, k, batch, &ratio);
    VectorXd g = obj.grad(z);
    // Only the pretraining data and the latest batch carry weight.
    const VectorXd xw = (1.0 - w) * mu0 + w * z;
    current = refit_bias_frozen(current, xw);
    const double y = target_y(current, g, cfg.sigma, eta);
    state.history.push_back(make_record(k, z, obj, state.f_star, y, g, ratio, batch));
    gs.kind = GuidanceKind::Loss;
    gs.g = std::move(g);
    gs.y = y;
  }
  state.model = current;
  return state;
}

std::vector<VectorXd> exact_mean_recursion(const LinearScoreModel& model,
                                           const Objective& obj,
                                           const OptConfig& cfg,
                                           const NoiseSchedule& sched,
                                           int which_alg) {
  OptConfig exact = cfg;
  exact.exact_mean = true;
  const OptRunState state = (which_alg == 2) ? run_alg2(model, obj, exact, sched, 0)
                                             : run_alg1(model, obj, exact, sched, 0);
  std::vector<VectorXd> means;
  means.reserve(state.history.size());
  for (const auto& r : state.history) means.push_back(r.z_bar);
  return means;
}

std::string trajectory_csv(const OptRunState& state) {
  CsvBuilder csv({"k", "f_zbar", "gap_to_x_star", "off_support_ratio", "y_k",
                  "g_norm", "batch_size"});
  for (const auto& r : state.history) {
    csv.begin_row();
    csv.add(r.k);
    csv.add(r.f_value);
    csv.add(r.gap_to_opt);
    csv.add(r.off_support);
    csv.add(r.y);
    csv.add(r.g_norm);
    csv.add(r.batch_size);
  }
  return csv.str();
}

}  // namespace gdopt
