// Command-line front end: fit score models, draw guided samples, run the two
// optimization loops, run the oracle suite, and emit the figure CSVs.

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "gdopt/config.hpp"
#include "gdopt/csv.hpp"
#include "gdopt/rng.hpp"
#include "gdopt/verify.hpp"

namespace fs = std::filesystem;
using namespace gdopt;

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs* args, bool config_required = true) {
  auto* opt = cmd->add_option("--config", args->config_path, "run config (flat TOML subset)");
  if (config_required) opt->required();
  cmd->add_option("--seed", args->seed, "master seed override");
  cmd->add_option("--out", args->out_dir, "output directory override");
  cmd->add_option("--threads", args->threads, "worker thread bound (results unchanged)");
}

RunConfig load(const CommonArgs& args) {
  RunConfig cfg = load_run_config(args.config_path);
  apply_overrides(cfg, args.seed, args.out_dir, args.threads);
  fs::create_directories(cfg.out_dir);
  return cfg;
}

std::string hash_comment(const RunConfig& cfg) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(cfg.config_hash));
  return std::string("config_hash=") + buf;
}

void write_csv(const RunConfig& cfg, const std::string& name, const std::string& body) {
  // body already starts with its header row; prepend the hash comment.
  const std::string path = (fs::path(cfg.out_dir) / name).string();
  write_file_atomic(path, "# " + hash_comment(cfg) + "\n" + body);
  std::cout << "wrote " << path << "\n";
}

int cmd_fit(const CommonArgs& args) {
  const RunConfig cfg = load(args);
  const Dataset data = make_dataset(cfg);
  const LinearScoreModel model = make_model(cfg, data);
  const std::string path = (fs::path(cfg.out_dir) / "model.txt").string();
  save_model(path, model);
  std::cout << "wrote " << path << " (" << model.kind_name() << ", D=" << model.dim()
            << ")\n";
  return 0;
}

int cmd_sample(const CommonArgs& args) {
  const RunConfig cfg = load(args);
  const NoiseSchedule sched = make_schedule(cfg);
  const SamplerConfig sc = make_sampler_config(cfg);  // validate before generating
  const Dataset data = make_dataset(cfg);
  const LinearScoreModel model = make_model(cfg, data);
  const SubspaceBasis* basis =
      model.basis() ? model.basis() : (data.basis ? &*data.basis : nullptr);
  const GuidanceSpec spec = make_guidance(cfg, model, basis);

  SampleBatch batch;
  if (sc.mode == SampleMode::Sde) {
    batch = backward_sample(model, spec, sc, sched);
  } else {
    const GaussianDist stats = model.implied_stats();
    const GaussianDist post = (spec.kind == GuidanceKind::None)
                                  ? stats
                                  : analytic_posterior(stats, spec.g, spec.y, spec.sigma);
    batch = oracle_sample(post, sc.batch, sc.seed, sc.threads);
  }

  Dataset out;
  out.samples = batch.samples;
  out.seed = sc.seed;
  if (basis) out.basis = *basis;
  const std::string batch_path = (fs::path(cfg.out_dir) / "samples.txt").string();
  save_dataset(batch_path, out);

  // sidecar with the run metadata
  {
    std::ostringstream meta;
    meta << "sampler_run v1\nseed " << sc.seed << "\nsteps " << sc.n_steps << "\nT "
         << sc.T << "\nmode " << (sc.mode == SampleMode::Sde ? "sde" : "oracle")
         << "\nbatch " << sc.batch << "\n";
    write_file_atomic((fs::path(cfg.out_dir) / "samples.meta.txt").string(), meta.str());
  }

  const VectorXd mean = batch.mean();
  CsvBuilder csv({"batch", "mean_norm", "off_support_ratio"});
  csv.begin_row();
  csv.add(sc.batch);
  csv.add(mean.norm());
  csv.add(basis ? mean_off_support_ratio(batch.samples, *basis) : 0.0);
  write_csv(cfg, "sample_stats.csv", csv.str());
  std::cout << "wrote " << batch_path << "\n";
  return 0;
}

int run_optimizer(const CommonArgs& args, int which_alg) {
  const RunConfig cfg = load(args);
  const NoiseSchedule sched = make_schedule(cfg);
  const Dataset data = make_dataset(cfg);
  const LinearScoreModel model = make_model(cfg, data);
  const SubspaceBasis* basis =
      model.basis() ? model.basis() : (data.basis ? &*data.basis : nullptr);
  const Objective obj = make_objective(cfg, basis);
  const OptConfig oc = make_opt_config(cfg);
  const OptRunState state = (which_alg == 2)
                                ? run_alg2(model, obj, oc, sched, cfg.master_seed)
                                : run_alg1(model, obj, oc, sched, cfg.master_seed);
  write_csv(cfg, which_alg == 2 ? "alg2_trajectory.csv" : "alg1_trajectory.csv",
            trajectory_csv(state));
  std::cout << "final f = " << format_double(state.history.back().f_value)
            << ", oracle optimum f* = " << format_double(state.f_star) << "\n";
  return 0;
}

int cmd_verify(const CommonArgs& args) {
  VerifyOptions opts;
  RunConfig cfg;
  if (!args.config_path.empty()) {
    cfg = load(args);
    opts.seed = cfg.master_seed;
    opts.threads = cfg.threads;
  } else {
    cfg.out_dir = args.out_dir.value_or("out");
    if (args.seed) opts.seed = *args.seed;
    if (args.threads) opts.threads = *args.threads;
    cfg.config_hash = fnv1a64("verify-defaults#" + std::to_string(opts.seed));
    fs::create_directories(cfg.out_dir);
  }
  const auto reports = run_all_checks(opts);
  print_report(std::cout, reports);
  write_csv(cfg, "verify_report.csv", report_csv(reports));
  return all_pass(reports) ? 0 : 1;
}

// Figure CSVs: off-support ratio per round for the two guidance forms,
// reward-vs-round panels over a grid of regularization strengths, and the
// fine-tuned run. Plotting is external; any tool can consume these.
int cmd_figures(const CommonArgs& args) {
  const RunConfig cfg = load(args);
  const NoiseSchedule sched = make_schedule(cfg);
  const Dataset data = make_dataset(cfg);
  if (!data.basis)
    throw std::invalid_argument("figures: the dataset must carry a subspace basis");
  const SubspaceBasis& basis = *data.basis;
  const LinearScoreModel model = fit_subspace(data);

  const int fig_rounds = static_cast<int>(cfg.table.get_int_or("figures", "K", 30));
  const int fig_batch = static_cast<int>(cfg.table.get_int_or("figures", "B", 256));

  // Ratio comparison: look-ahead-loss vs raw-gradient guidance, SDE sampling.
  {
    const VectorXd theta = make_split_direction(basis, 1.0, 9.0, cfg.master_seed + 3);
    const Objective obj{Objective::Variant(QuadScalarObjective{theta, 3.0, 10.0})};
    OptConfig oc = make_opt_config(cfg);
    oc.rounds = fig_rounds;
    oc.batch = BatchSchedule::constant_size(fig_batch);
    oc.mode = SampleMode::Sde;
    oc.exact_mean = false;
    oc.beta_rule = BetaRule::subspace_theory();
    const OptRunState loss_run = run_alg1(model, obj, oc, sched, cfg.master_seed);

    // Same rounds with the naive guidance: reuse the loss run's gradients in a
    // direct sampling loop so both columns see the same round structure.
    SamplerConfig sc;
    sc.T = oc.T;
    sc.n_steps = oc.n_steps;
    sc.batch = fig_batch;
    sc.threads = cfg.threads;
    CsvBuilder csv({"round", "off_ratio_loss", "off_ratio_naive"});
    for (std::size_t k = 0; k < loss_run.history.size(); ++k) {
      double naive_ratio;
      if (k == 0) {
        naive_ratio = loss_run.history[0].off_support;
      } else {
        GuidanceSpec gs;
        gs.kind = GuidanceKind::Naive;
        gs.g = loss_run.history[k - 1].g;
        gs.y = loss_run.history[k - 1].y;
        gs.sigma = oc.sigma;
        gs.beta_rule = BetaRule::subspace_theory();
        sc.seed = Rng::stream(cfg.master_seed ^ 0x9e3779b9ull, k);
        const SampleBatch nb = backward_sample(model, gs, sc, sched);
        naive_ratio = mean_off_support_ratio(nb.samples, basis);
      }
      csv.begin_row();
      csv.add(static_cast<int>(k));
      csv.add(loss_run.history[k].off_support);
      csv.add(naive_ratio);
    }
    write_csv(cfg, "fig_ratio_loss_vs_naive.csv", csv.str());
  }

  // Reward vs round at several regularization strengths, for the two
  // quadratic setups (on-support direction; off/on ratio 9) and the
  // distance objective. For smooth objectives the grid sits above the
  // smoothness constant; below it the theory step size 1/lambda diverges.
  const auto reward_panel = [&](const Objective& obj, const std::string& name) {
    std::vector<double> lambdas = {0.5, 1.0, 2.0, 8.0};
    if (obj.is_smooth()) {
      const double l = obj.smoothness_adapted(model.implied_stats());
      lambdas = {1.25 * l, 1.5 * l, 2.0 * l, 4.0 * l};
    }
    std::vector<OptRunState> runs;
    for (double lambda : lambdas) {
      OptConfig oc = make_opt_config(cfg);
      oc.rounds = fig_rounds;
      oc.batch = BatchSchedule::constant_size(fig_batch);
      oc.mode = SampleMode::AnalyticOracle;
      oc.lambda = lambda;
      runs.push_back(run_alg1(model, obj, oc, sched, cfg.master_seed));
    }
    std::vector<std::string> cols = {"round"};
    for (double lambda : lambdas) {
      char label[32];
      std::snprintf(label, sizeof(label), "%.4g", lambda);
      cols.push_back(std::string("reward_lambda_") + label);
    }
    CsvBuilder csv(cols);
    for (int k = 0; k <= fig_rounds; ++k) {
      csv.begin_row();
      csv.add(k);
      for (const auto& run : runs) csv.add(run.history[k].f_value);
    }
    write_csv(cfg, name, csv.str());
  };

  const VectorXd theta_on = make_split_direction(basis, 1.0, 0.0, cfg.master_seed + 4);
  reward_panel(Objective{Objective::Variant(QuadScalarObjective{theta_on, 3.0, 10.0})},
               "fig_reward_alg1_on_support.csv");
  const VectorXd theta_off = make_split_direction(basis, 1.0, 9.0, cfg.master_seed + 5);
  reward_panel(Objective{Objective::Variant(QuadScalarObjective{theta_off, 3.0, 10.0})},
               "fig_reward_alg1_ratio9.csv");
  const int dim = basis.ambient_dim();
  reward_panel(Objective{Objective::Variant(DistNormObjective{VectorXd::Constant(dim, 4.0), 5.0, 0.5})},
               "fig_reward_alg1_distance.csv");

  // Fine-tuned run reward curve.
  {
    const Objective obj{Objective::Variant(QuadScalarObjective{theta_off, 3.0, 10.0})};
    OptConfig oc = make_opt_config(cfg);
    oc.rounds = std::max(fig_rounds, 200);
    oc.batch = BatchSchedule::constant_size(fig_batch);
    oc.mode = SampleMode::AnalyticOracle;
    oc.alg2.lambda_rule = Alg2Options::LambdaRule::LLogKover4K;
    oc.alg2.eta_rule = Alg2Options::EtaRule::TwoOverLplus2Lambda;
    const OptRunState run = run_alg2(model, obj, oc, sched, cfg.master_seed);
    CsvBuilder csv({"round", "reward", "off_support_ratio"});
    for (const auto& r : run.history) {
      csv.begin_row();
      csv.add(r.k);
      csv.add(r.f_value);
      csv.add(r.off_support);
    }
    write_csv(cfg, "fig_reward_alg2.csv", csv.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"guided diffusion sampling with closed-form linear score models"};
  app.require_subcommand(1);

  CommonArgs fit_args, sample_args, alg1_args, alg2_args, verify_args, figures_args;
  auto* fit = app.add_subcommand("fit", "fit the configured score class and write the model");
  add_common(fit, &fit_args);
  auto* sample = app.add_subcommand("sample", "draw a guided sample batch and stats CSV");
  add_common(sample, &sample_args);
  auto* alg1 = app.add_subcommand("alg1", "guidance-only optimization run; trajectory CSV");
  add_common(alg1, &alg1_args);
  auto* alg2 = app.add_subcommand("alg2", "adaptive fine-tuning run; trajectory CSV");
  add_common(alg2, &alg2_args);
  auto* verify = app.add_subcommand("verify", "run the oracle suite; nonzero exit on failure");
  add_common(verify, &verify_args, /*config_required=*/false);
  auto* figures = app.add_subcommand("figures", "emit the figure CSVs");
  add_common(figures, &figures_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return cmd_fit(fit_args);
    if (sample->parsed()) return cmd_sample(sample_args);
    if (alg1->parsed()) return run_optimizer(alg1_args, 1);
    if (alg2->parsed()) return run_optimizer(alg2_args, 2);
    if (verify->parsed()) return cmd_verify(verify_args);
    if (figures->parsed()) return cmd_figures(figures_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
