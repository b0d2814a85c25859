#include "gdopt/sampler.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gdopt/parallel.hpp"
#include "gdopt/rng.hpp"

namespace gdopt {

namespace {

// Per-step affine form of the guided drift. With s(x) = C x + b the update is
//   x <- x + dt [ x/2 + C x + b + coef (y - v'x - c0) dir ] (+ sqrt(dt) xi),
// where v'x + c0 = g' E[x0|x] reproduces g_loss / g_naive exactly. Hoisting
// these constants leaves one mat-vec and two dots per sample step.
struct StepTable {
  double t_fwd = 0.0;
  MatrixXd c;
  VectorXd b;
  bool guided = false;
  double coef = 0.0;  // 2*beta (loss) or beta (naive)
  VectorXd dir;       // J'g (loss) or g (naive)
  VectorXd v;         // J'g: gradient of g'E[x0|x] in x
  double c0 = 0.0;    // h g'b / alpha
};

std::vector<StepTable> build_steps(const LinearScoreModel& model,
                                   const GuidanceSpec& spec,
                                   const SamplerConfig& cfg,
                                   const NoiseSchedule& sched) {
  const int n = cfg.n_steps;
  const double dt = cfg.T / n;
  const bool guided = spec.kind != GuidanceKind::None && spec.g.size() > 0 &&
                      spec.g.norm() > 0.0;
  std::vector<StepTable> steps(n);
  for (int j = 0; j < n; ++j) {
    StepTable& st = steps[j];
    st.t_fwd = cfg.T - j * dt;
    try {
      const auto [a, h] = sched.alpha_h(st.t_fwd);
      auto [c, b] = model.affine_coeffs(st.t_fwd, sched);
      st.c = std::move(c);
      st.b = std::move(b);
      if (!guided) continue;
      st.guided = true;
      const double bt = beta(spec, model, st.t_fwd, sched);
      st.coef = (spec.kind == GuidanceKind::Loss) ? 2.0 * bt : bt;
      st.dir = (spec.kind == GuidanceKind::Loss)
                   ? model.tweedie_jacobian_apply(spec.g, st.t_fwd, sched)
                   : spec.g;
      st.v = model.tweedie_jacobian_apply(spec.g, st.t_fwd, sched);
      st.c0 = h * spec.g.dot(st.b) / a;
    } catch (const std::exception& e) {
      throw std::runtime_error("backward_sample: step " + std::to_string(j) +
                               " (t=" + std::to_string(st.t_fwd) + "): " + e.what());
    }
  }
  return steps;
}

}  // namespace

SampleBatch backward_sample(const LinearScoreModel& model, const GuidanceSpec& spec,
                            const SamplerConfig& cfg, const NoiseSchedule& sched) {
  if (cfg.n_steps < 1)
    throw std::invalid_argument("backward_sample: n_steps must be >= 1");
  if (cfg.batch < 1) throw std::invalid_argument("backward_sample: batch must be >= 1");
  if (cfg.T > sched.horizon() + 1e-12)
    throw std::invalid_argument("backward_sample: T exceeds the schedule horizon");

  const int n = cfg.n_steps;
  const int dim = model.dim();
  const double dt = cfg.T / n;
  const double sqrt_dt = std::sqrt(dt);
  const auto steps = build_steps(model, spec, cfg, sched);

  SampleBatch out;
  out.config = cfg;
  out.samples.resize(cfg.batch, dim);
  out.streams.resize(cfg.batch);
  for (int i = 0; i < cfg.batch; ++i) out.streams[i] = Rng::stream(cfg.seed, i);

  parallel_for(cfg.batch, cfg.threads, [&](std::int64_t i) {
    Rng rng(out.streams[i]);
    VectorXd x(dim), drift(dim);
    for (int k = 0; k < dim; ++k) x(k) = rng.normal();
    for (int j = 0; j < n; ++j) {
      const StepTable& st = steps[j];
      drift.noalias() = st.c * x;
      drift += 0.5 * x + st.b;
      if (st.guided) {
        const double resid = spec.y - st.v.dot(x) - st.c0;
        drift += (st.coef * resid) * st.dir;
      }
      x += dt * drift;
      if (j + 1 < n) {
        for (int k = 0; k < dim; ++k) x(k) += sqrt_dt * rng.normal();
      }
    }
    out.samples.row(i) = x.transpose();
  });
  return out;
}

GaussianDist analytic_posterior(const GaussianDist& stats, const VectorXd& g,
                                double y, double sigma) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("analytic_posterior: sigma must be positive");
  const VectorXd sg = stats.cov * g;
  const double den = sigma * sigma + g.dot(sg);
  GaussianDist post;
  post.mean = stats.mean + ((y - g.dot(stats.mean)) / den) * sg;
  post.cov = stats.cov - (sg * sg.transpose()) / den;
  post.cov = 0.5 * (post.cov + post.cov.transpose());
  return post;
}

SampleBatch oracle_sample(const GaussianDist& dist, int batch, std::uint64_t seed,
                          int threads) {
  if (batch < 1) throw std::invalid_argument("oracle_sample: batch must be >= 1");
  const int dim = dist.dim();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (dist.cov + dist.cov.transpose()));
  VectorXd lam = es.eigenvalues();
  if (lam.minCoeff() < -1e-10)
    throw std::invalid_argument("oracle_sample: covariance has negative eigenvalue");
  // zero out round-off eigenvalues so degenerate Gaussians stay degenerate
  const double floor = 1e-12 * std::max(0.0, lam.maxCoeff());
  for (int i = 0; i < lam.size(); ++i)
    if (lam(i) < floor) lam(i) = 0.0;
  const MatrixXd sqrt_cov = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();

  SampleBatch out;
  out.config.batch = batch;
  out.config.seed = seed;
  out.config.mode = SampleMode::AnalyticOracle;
  out.config.threads = threads;
  out.samples.resize(batch, dim);
  out.streams.resize(batch);
  for (int i = 0; i < batch; ++i) out.streams[i] = Rng::stream(seed, i);

  parallel_for(batch, threads, [&](std::int64_t i) {
    Rng rng(out.streams[i]);
    VectorXd z(dim);
    for (int k = 0; k < dim; ++k) z(k) = rng.normal();
    out.samples.row(i) = (dist.mean + sqrt_cov * z).transpose();
  });
  return out;
}

double naive_offsupport_expectation(double b0, double T, int panels) {
  if (!(T >= 1.0))
    throw std::domain_error("naive_offsupport_expectation: requires T >= 1");
  if (panels < 8) throw std::invalid_argument("naive_offsupport_expectation: panels too small");
  // Inner integrand after s = v^2: 2v / (1 - e^{-v}), finite limit 2 at v = 0.
  const auto inner = [](double v) {
    if (v < 1e-8) return 2.0 + v;  // series: 2v/(v - v^2/2 + ...) = 2 + v + O(v^2)
    return 2.0 * v / (1.0 - std::exp(-v));
  };
  const double umax = std::sqrt(T);
  const double du = umax / panels;
  double cum = 0.0;       // int_0^u inner
  double prev_in = inner(0.0);
  double prev_out = 0.0;  // outer integrand at u = 0 vanishes (factor 2u)
  double acc = 0.0;
  for (int k = 1; k <= panels; ++k) {
    const double u = k * du;
    const double cur_in = inner(u);
    cum += 0.5 * du * (prev_in + cur_in);
    const double cur_out = std::exp(-cum + 0.5 * u * u) * 2.0 * u;
    acc += 0.5 * du * (prev_out + cur_out);
    prev_in = cur_in;
    prev_out = cur_out;
  }
  return b0 * acc;
}

double naive_offsupport_expectation(double b0, double T) {
  // The coefficient is linear in b0, so the refinement runs at unit drift.
  int panels = 512;
  double prev = naive_offsupport_expectation(1.0, T, panels);
  for (int level = 0; level < 12; ++level) {
    panels *= 2;
    const double cur = naive_offsupport_expectation(1.0, T, panels);
    if (std::abs(cur - prev) < 1e-9 * std::max(1.0, std::abs(cur)))
      return b0 * cur;
    prev = cur;
  }
  return b0 * prev;
}

}  // namespace gdopt
