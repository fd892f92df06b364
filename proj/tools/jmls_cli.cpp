// Command-line frontend: simulation, identification, smoothing and H2
// evaluation for jump Markov linear models.
//
// Exit codes: 0 success, 1 validation/usage error, 2 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "jmls/experiments.hpp"
#include "jmls/io.hpp"

namespace {

using namespace jmls;

struct CommonFlags {
  std::uint64_t seed = 1;
  int particles = 3;
  int iters = 1000;
  int repeats = 7;
  std::string out_dir = ".";
  bool paper_scale = false;
  std::string config_file;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--seed", flags.seed, "rng seed");
  cmd->add_option("--particles", flags.particles, "particle count N");
  cmd->add_option("--iters", flags.iters, "iteration count");
  cmd->add_option("--repeats", flags.repeats, "independent repeats");
  cmd->add_option("--out-dir", flags.out_dir, "output directory");
  cmd->add_flag("--paper-scale", flags.paper_scale, "use full-scale horizons");
  cmd->add_option("--config", flags.config_file, "JSON config file");
}

int run_simulate(const std::string& model_path, const std::string& out_path,
                 double input_pole, std::uint64_t seed) {
  const JmlsModel model = load_model(model_path);
  const auto violations = validate_model(model, /*require_pd_R=*/false);
  if (!violations.empty()) {
    std::cerr << "invalid model: " << violations.front() << "\n";
    return 1;
  }
  Rng rng(seed);
  const Matrix u = generate_input(model.dims.T, model.dims.n_u, input_pole, rng);
  auto [data, traj] = simulate(model, u, rng);
  save_dataset(data, out_path);
  std::cout << "wrote " << out_path << " (T=" << data.T() << ")\n";
  return 0;
}

int run_identify(const std::string& model_path, const std::string& data_path,
                 const std::string& truth_path, const std::string& resume_path,
                 int checkpoint_every, bool single_occupancy, const StepSchedule& schedule,
                 const CommonFlags& flags) {
  const Dataset data = load_dataset(data_path);
  std::optional<JmlsModel> truth;
  if (!truth_path.empty()) truth = load_model(truth_path);

  std::filesystem::create_directories(flags.out_dir);
  std::ofstream log(flags.out_dir + "/iterates.csv");
  log << "k,gamma_k,mode,param_block,frobenius_delta,h2_error_if_truth_known\n";

  PsaemOptions options;
  options.m_step.single_occupancy = single_occupancy;

  Rng rng(flags.seed);
  PsaemState state;
  int remaining = flags.iters;
  if (!resume_path.empty()) {
    Checkpoint ck = load_checkpoint(resume_path);
    state = std::move(ck.state);
    if (!ck.rng_state.empty()) rng = Rng::deserialize(ck.rng_state);
    std::cout << "resuming at iteration " << state.iteration << "\n";
  } else {
    const JmlsModel model0 = load_model(model_path);
    const auto violations = validate_model(model0);
    if (!violations.empty()) {
      std::cerr << "invalid initial model: " << violations.front() << "\n";
      return 1;
    }
    state.theta = model0;
    state.stats = SuffStats::zeros(model0.dims);
    state.reference.resize(static_cast<std::size_t>(data.T()));
    for (auto& s : state.reference) s = rng.categorical(model0.p_s1) + 1;
  }

  JmlsModel prev = state.theta;
  const std::string ck_path = flags.out_dir + "/checkpoint.json";
  auto callback = [&](const PsaemState& st, const PsaemDiagnostics& diag) {
    H2Report report;
    if (truth) report = match_modes(*truth, st.theta);
    const char* blocks[] = {"A", "B", "C", "D", "Q", "R"};
    for (int n = 1; n <= st.theta.dims.K; ++n) {
      const Matrix* cur[] = {&st.theta.mode(n).A, &st.theta.mode(n).B, &st.theta.mode(n).C,
                             &st.theta.mode(n).D, &st.theta.mode(n).Q, &st.theta.mode(n).R};
      const Matrix* old[] = {&prev.mode(n).A, &prev.mode(n).B, &prev.mode(n).C,
                             &prev.mode(n).D, &prev.mode(n).Q, &prev.mode(n).R};
      for (int b = 0; b < 6; ++b) {
        log << diag.k << "," << format_double(diag.gamma) << "," << n << "," << blocks[b]
            << "," << format_double((*cur[b] - *old[b]).norm()) << ",";
        if (truth) log << format_double(report.per_mode[static_cast<std::size_t>(n - 1)]);
        log << "\n";
      }
    }
    log << diag.k << "," << format_double(diag.gamma) << ",0,Pi,"
        << format_double((st.theta.Pi - prev.Pi).norm()) << ",\n";
    prev = st.theta;
    if (checkpoint_every > 0 && diag.k % checkpoint_every == 0) {
      save_checkpoint(st, rng.serialize(), ck_path);
    }
  };

  const PsaemRun run = rb_psaem_continue(std::move(state), data, flags.particles, remaining,
                                         schedule, rng, callback, options);
  save_checkpoint(run.state, rng.serialize(), ck_path);
  save_model(run.state.theta, flags.out_dir + "/estimate.json");
  std::cout << "wrote " << flags.out_dir << "/estimate.json after " << run.state.iteration
            << " iterations\n";
  return 0;
}

int run_smooth(const std::string& model_path, const std::string& data_path,
               const std::string& out_path, const std::string& trace_path, int burn_in,
               const CommonFlags& flags) {
  const JmlsModel model = load_model(model_path);
  const auto violations = validate_model(model);
  if (!violations.empty()) {
    std::cerr << "invalid model: " << violations.front() << "\n";
    return 1;
  }
  const Dataset data = load_dataset(data_path);
  Rng rng(flags.seed);
  const SmootherResult res =
      mcmc_smoother(model, data, flags.particles, flags.iters, burn_in, rng);

  std::ofstream out(out_path);
  out << "t";
  for (int k = 1; k <= model.dims.K; ++k) out << ",p_mode" << k;
  out << "\n";
  for (int t = 0; t < data.T(); ++t) {
    out << (t + 1);
    for (int k = 0; k < model.dims.K; ++k) out << "," << format_double(res.marginals(t, k));
    out << "\n";
  }
  std::cout << "wrote " << out_path << "\n";

  if (!trace_path.empty()) {
    std::ofstream trace(trace_path);
    trace << "iter,t,s_t\n";
    for (std::size_t k = 0; k < res.chain.size(); ++k) {
      for (int t = 0; t < data.T(); ++t) {
        trace << (k + 1) << "," << (t + 1) << ","
              << res.chain[k][static_cast<std::size_t>(t)] << "\n";
      }
    }
    std::cout << "wrote " << trace_path << "\n";
  }
  return 0;
}

int run_eval_h2(const std::string& true_path, const std::string& est_path,
                const std::string& out_path) {
  const JmlsModel truth = load_model(true_path);
  const JmlsModel est = load_model(est_path);
  const H2Report report = match_modes(truth, est);
  std::cout << "mean H2 error: " << format_double(report.mean) << "\n";
  for (int n = 1; n <= truth.dims.K; ++n) {
    std::cout << "  true mode " << n << " ~ est mode "
              << report.permutation[static_cast<std::size_t>(n - 1)] << ": "
              << format_double(report.per_mode[static_cast<std::size_t>(n - 1)]) << "\n";
  }
  if (report.n_unstable > 0) {
    std::cout << "  unstable matched modes: " << report.n_unstable << "\n";
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << "{\n  \"mean\": " << format_double(report.mean) << ",\n  \"per_mode\": [";
    for (std::size_t i = 0; i < report.per_mode.size(); ++i) {
      out << (i ? ", " : "") << format_double(report.per_mode[i]);
    }
    out << "],\n  \"permutation\": [";
    for (std::size_t i = 0; i < report.permutation.size(); ++i) {
      out << (i ? ", " : "") << report.permutation[i];
    }
    out << "],\n  \"n_unstable\": " << report.n_unstable << "\n}\n";
  }
  return 0;
}

int run_example(int example, const CommonFlags& flags, int T_override) {
  ExperimentConfig config;
  if (!flags.config_file.empty()) config = ExperimentConfig::from_json_file(flags.config_file);
  config.example = example;
  config.seed = flags.seed;
  config.particles = flags.particles;
  config.n_iters = flags.iters;
  config.n_repeats = flags.repeats;
  config.out_dir = flags.out_dir;
  config.paper_scale = flags.paper_scale;
  if (T_override > 0) config.T = T_override;
  const ExperimentResult result = run_experiment(config);
  std::cout << "wrote " << result.files.size() << " files under " << config.out_dir << "\n";
  int r = 0;
  for (const auto& rep : result.repeats) {
    std::cout << "  repeat " << r++ << ": initial H2 " << format_double(rep.h2_mean.front())
              << ", final H2 " << format_double(rep.h2_mean.back()) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jump Markov linear system identification via RB-PSAEM"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* sim = app.add_subcommand("simulate", "simulate a dataset from a model file");
  std::string sim_model, sim_out = "data.csv";
  double sim_pole = 0.9;
  sim->add_option("--model", sim_model, "model JSON file")->required();
  sim->add_option("--out", sim_out, "output dataset CSV");
  sim->add_option("--input-pole", sim_pole, "low-pass input filter pole");
  add_common(sim, flags);

  auto* ident = app.add_subcommand("identify", "run RB-PSAEM on a dataset");
  std::string id_model, id_data, id_truth, id_resume;
  int id_ck_every = 0;
  bool id_single_occ = false;
  StepSchedule schedule;
  ident->add_option("--model-init", id_model, "initial model JSON file");
  ident->add_option("--data", id_data, "dataset CSV")->required();
  ident->add_option("--truth", id_truth, "true model JSON for H2 logging");
  ident->add_option("--resume", id_resume, "checkpoint to resume from");
  ident->add_option("--checkpoint-every", id_ck_every, "checkpoint period (iterations)");
  ident->add_flag("--single-occupancy", id_single_occ,
                  "use the folded single-count noise divisors");
  ident->add_option("--schedule-burn-in", schedule.burn_in, "iterations with gamma = 1");
  ident->add_option("--schedule-exponent", schedule.exponent, "step-size decay exponent");
  add_common(ident, flags);

  auto* smooth = app.add_subcommand("smooth", "posterior mode marginals via the MCMC smoother");
  std::string sm_model, sm_data, sm_out = "marginals.csv", sm_trace;
  int sm_burn = 100;
  smooth->add_option("--model", sm_model, "model JSON file")->required();
  smooth->add_option("--data", sm_data, "dataset CSV")->required();
  smooth->add_option("--out", sm_out, "marginals CSV");
  smooth->add_option("--trace", sm_trace, "per-iteration trace CSV (iter,t,s_t)");
  smooth->add_option("--burn-in", sm_burn, "discarded iterations");
  add_common(smooth, flags);

  auto* evalh2 = app.add_subcommand("eval-h2", "H2 error report between two model files");
  std::string ev_true, ev_est, ev_out;
  evalh2->add_option("--true", ev_true, "true model JSON")->required();
  evalh2->add_option("--est", ev_est, "estimated model JSON")->required();
  evalh2->add_option("--out", ev_out, "report JSON");

  auto* ex1 = app.add_subcommand("example1", "scalar two-mode benchmark pipeline");
  auto* ex2 = app.add_subcommand("example2", "two-dimensional three-mode benchmark pipeline");
  int ex_T = 0;
  ex1->add_option("--T", ex_T, "horizon override");
  ex2->add_option("--T", ex_T, "horizon override");
  add_common(ex1, flags);
  add_common(ex2, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return run_simulate(sim_model, sim_out, sim_pole, flags.seed);
    if (ident->parsed()) {
      if (id_model.empty() && id_resume.empty()) {
        std::cerr << "identify: need --model-init or --resume\n";
        return 1;
      }
      return run_identify(id_model, id_data, id_truth, id_resume, id_ck_every, id_single_occ,
                          schedule, flags);
    }
    if (smooth->parsed()) {
      return run_smooth(sm_model, sm_data, sm_out, sm_trace, sm_burn, flags);
    }
    if (evalh2->parsed()) return run_eval_h2(ev_true, ev_est, ev_out);
    if (ex1->parsed()) return run_example(1, flags, ex_T);
    if (ex2->parsed()) return run_example(2, flags, ex_T);
  } catch (const jmls::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
