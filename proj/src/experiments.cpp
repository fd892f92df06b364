#include "jmls/experiments.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>

#include "json.hpp"

namespace jmls {

namespace {

const char* const kAggregateHeader =
    "# absolute H2 error (not normalized); mean/std over repeats with a finite "
    "value at that iteration";

Vector dirichlet_uniform(Rng& rng, int K) {
  // Dirichlet(1) via normalized exponentials.
  Vector v(K);
  for (int i = 0; i < K; ++i) v(i) = -std::log(1.0 - rng.uniform());
  return v / v.sum();
}

Matrix sticky_transition_matrix(Rng& rng, int K) {
  // Dirichlet(1) rows re-weighted into the sticky half-space: the raw self
  // mass maps affinely onto [0.5, 1] so segments stay long enough for the
  // modes to be identifiable, without piling draws onto the 0.5 boundary.
  Matrix pi(K, K);
  for (int n = 0; n < K; ++n) {
    Vector row = dirichlet_uniform(rng, K);
    const double self = 0.5 + 0.5 * row(n);
    const double off = row.sum() - row(n);
    for (int m = 0; m < K; ++m) {
      row(m) = (m == n) ? self : row(m) * (1.0 - self) / off;
    }
    pi.row(n) = row / row.sum();
  }
  return pi;
}

void fill_uniform(Matrix& m, double lo, double hi, Rng& rng) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(lo, hi);
  }
}

std::string repeat_prefix(const std::string& out_dir, int r) {
  return out_dir + "/repeat_" + std::to_string(r);
}

void write_bode_csv(const std::string& path, const JmlsModel& truth, const JmlsModel& init,
                    const JmlsModel& est, int n_points) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << "which,mode,iu,iy,omega,mag,phase\n";
  const struct {
    const char* name;
    const JmlsModel* model;
  } entries[] = {{"true", &truth}, {"init", &init}, {"est", &est}};
  for (const auto& e : entries) {
    for (const BodePoint& p : bode_grid(*e.model, n_points)) {
      out << e.name << "," << p.mode << "," << p.iu << "," << p.iy << ","
          << format_double(p.omega) << "," << format_double(p.mag) << ","
          << format_double(p.phase) << "\n";
    }
  }
}

struct RepeatFiles {
  std::vector<std::string> paths;
};

RepeatResult run_repeat(const ExperimentConfig& config, int r, RepeatFiles& files) {
  Rng rng(Rng::derive(config.seed, static_cast<std::uint64_t>(r)));
  const int T = config.effective_T();

  RepeatResult result;
  result.truth = config.example == 2 ? draw_example2_model(rng, config.ranges)
                                     : draw_example1_model(rng, config.ranges);
  result.truth.dims.T = T;

  const Matrix u = generate_input(T, result.truth.dims.n_u, config.input_filter_pole, rng);
  auto [data, traj] = simulate(result.truth, u, rng);
  result.init = perturb_model(result.truth, config.perturb_lo, config.perturb_hi, rng);

  const std::string prefix = repeat_prefix(config.out_dir, r);
  save_model(result.truth, prefix + "_truth.json");
  save_model(result.init, prefix + "_init.json");
  save_dataset(data, prefix + "_data.csv");

  const int K = result.truth.dims.K;
  result.h2_mean.assign(static_cast<std::size_t>(config.n_iters) + 1,
                        std::numeric_limits<double>::quiet_NaN());

  std::ofstream iter_csv(prefix + "_iterates.csv");
  if (!iter_csv) throw std::invalid_argument("cannot write " + prefix + "_iterates.csv");
  iter_csv << "k,h2_mean";
  for (int n = 1; n <= K; ++n) iter_csv << ",h2_mode" << n;
  iter_csv << ",n_unstable\n";

  std::ofstream log_csv;
  if (config.write_iterate_log) {
    log_csv.open(prefix + "_log.csv");
    log_csv << "k,gamma_k,mode,param_block,frobenius_delta,h2_error_if_truth_known\n";
  }

  auto emit_row = [&](int k, const H2Report& report) {
    result.h2_mean[static_cast<std::size_t>(k)] = report.mean;
    iter_csv << k << "," << format_double(report.mean);
    for (double e : report.per_mode) iter_csv << "," << format_double(e);
    iter_csv << "," << report.n_unstable << "\n";
  };
  // Slot 0 records the initial model's error; CSV rows cover iterations only.
  result.h2_mean[0] = match_modes(result.truth, result.init).mean;

  JmlsModel prev_theta = result.init;
  auto callback = [&](const PsaemState& state, const PsaemDiagnostics& diag) {
    const H2Report report = match_modes(result.truth, state.theta);
    emit_row(diag.k, report);
    if (log_csv.is_open()) {
      const char* blocks[] = {"A", "B", "C", "D", "Q", "R"};
      for (int n = 1; n <= K; ++n) {
        const ModeParams& cur = state.theta.mode(n);
        const ModeParams& old = prev_theta.mode(n);
        const Matrix* cur_blocks[] = {&cur.A, &cur.B, &cur.C, &cur.D, &cur.Q, &cur.R};
        const Matrix* old_blocks[] = {&old.A, &old.B, &old.C, &old.D, &old.Q, &old.R};
        // Matched estimated mode reported against true mode n.
        const double h2 = report.per_mode[static_cast<std::size_t>(n - 1)];
        for (int bi = 0; bi < 6; ++bi) {
          log_csv << diag.k << "," << format_double(diag.gamma) << "," << n << ","
                  << blocks[bi] << ","
                  << format_double((*cur_blocks[bi] - *old_blocks[bi]).norm()) << ","
                  << format_double(h2) << "\n";
        }
      }
      log_csv << diag.k << "," << format_double(diag.gamma) << ",0,Pi,"
              << format_double((state.theta.Pi - prev_theta.Pi).norm()) << ",\n";
    }
    prev_theta = state.theta;
  };

  PsaemOptions options;
  options.m_step = config.m_step;
  PsaemRun run = rb_psaem(result.init, data, config.particles, config.n_iters,
                          config.schedule, rng, callback, options);
  result.estimate = run.state.theta;

  save_model(result.estimate, prefix + "_estimate.json");
  write_bode_csv(prefix + "_bode.csv", result.truth, result.init, result.estimate,
                 config.bode_points);

  files.paths = {prefix + "_truth.json", prefix + "_init.json",  prefix + "_data.csv",
                 prefix + "_iterates.csv", prefix + "_estimate.json", prefix + "_bode.csv"};
  if (config.write_iterate_log) files.paths.push_back(prefix + "_log.csv");
  return result;
}

}  // namespace

int ExperimentConfig::effective_T() const {
  if (T > 0) return T;
  if (example == 2) return paper_scale ? 8000 : 2000;
  return paper_scale ? 3000 : 1000;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  nlohmann::json j;
  in >> j;
  ExperimentConfig c;
  c.example = j.value("example", c.example);
  c.T = j.value("T", c.T);
  c.particles = j.value("particles", c.particles);
  c.n_iters = j.value("iters", c.n_iters);
  c.n_repeats = j.value("repeats", c.n_repeats);
  c.seed = j.value("seed", c.seed);
  c.paper_scale = j.value("paper_scale", c.paper_scale);
  c.perturb_lo = j.value("perturb_lo", c.perturb_lo);
  c.perturb_hi = j.value("perturb_hi", c.perturb_hi);
  c.input_filter_pole = j.value("input_filter_pole", c.input_filter_pole);
  c.schedule.burn_in = j.value("schedule_burn_in", c.schedule.burn_in);
  c.schedule.exponent = j.value("schedule_exponent", c.schedule.exponent);
  c.m_step.single_occupancy = j.value("single_occupancy", c.m_step.single_occupancy);
  c.bode_points = j.value("bode_points", c.bode_points);
  c.write_iterate_log = j.value("write_iterate_log", c.write_iterate_log);
  c.out_dir = j.value("out_dir", c.out_dir);
  if (c.n_repeats < 1) throw std::invalid_argument("config: repeats must be >= 1");
  if (!(c.perturb_lo > 0.0) || c.perturb_hi < c.perturb_lo) {
    throw std::invalid_argument("config: perturbation range must be positive");
  }
  return c;
}

JmlsModel draw_example1_model(Rng& rng, const ParamRanges& ranges) {
  Dims dims;
  dims.n_z = 1;
  dims.n_y = 1;
  dims.n_u = 1;
  dims.K = 2;
  dims.T = 1000;
  JmlsModel model = JmlsModel::with_defaults(dims);
  for (auto& mode : model.modes) {
    mode.A(0, 0) = rng.uniform(ranges.a_lo, ranges.a_hi);
    mode.B(0, 0) = rng.uniform(ranges.b_lo, ranges.b_hi);
    mode.C(0, 0) = rng.uniform(ranges.c_lo, ranges.c_hi);
    mode.Q(0, 0) = rng.uniform(ranges.q_lo, ranges.q_hi);
    mode.R(0, 0) = rng.uniform(ranges.r_lo, ranges.r_hi);
  }
  model.Pi = sticky_transition_matrix(rng, dims.K);
  return model;
}

JmlsModel draw_example2_model(Rng& rng, const ParamRanges& ranges) {
  Dims dims;
  dims.n_z = 2;
  dims.n_y = 1;
  dims.n_u = 1;
  dims.K = 3;
  dims.T = 2000;
  JmlsModel model = JmlsModel::with_defaults(dims);
  for (auto& mode : model.modes) {
    const double e1 = rng.uniform(ranges.a_lo, ranges.a_hi);
    const double e2 = rng.uniform(ranges.a_lo, ranges.a_hi);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    Matrix rot(2, 2);
    rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    mode.A = rot * Eigen::DiagonalMatrix<double, 2>(e1, e2) * rot.transpose();
    fill_uniform(mode.B, ranges.b_lo, ranges.b_hi, rng);
    fill_uniform(mode.C, ranges.c_lo, ranges.c_hi, rng);
    mode.Q = rng.uniform(ranges.q_lo, ranges.q_hi) * Matrix::Identity(2, 2);
    mode.R(0, 0) = rng.uniform(ranges.r_lo, ranges.r_hi);
  }
  model.Pi = sticky_transition_matrix(rng, dims.K);
  return model;
}

JmlsModel perturb_model(const JmlsModel& model, double lo, double hi, Rng& rng) {
  if (!(lo > 0.0) || hi < lo) {
    throw std::invalid_argument("perturb_model: range must satisfy 0 < lo <= hi");
  }
  JmlsModel out = model;
  auto scale_entries = [&](Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) *= rng.uniform(lo, hi);
    }
  };
  auto scale_symmetric = [&](Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = i; j < m.cols(); ++j) {
        const double f = rng.uniform(lo, hi);
        m(i, j) *= f;
        if (j != i) m(j, i) = m(i, j);
      }
    }
    m = psd_project(m);
  };
  for (auto& mode : out.modes) {
    scale_entries(mode.A);
    scale_entries(mode.B);
    scale_entries(mode.C);
    scale_entries(mode.D);
    scale_symmetric(mode.Q);
    scale_symmetric(mode.R);
  }
  scale_entries(out.Pi);
  for (int n = 0; n < out.dims.K; ++n) out.Pi.row(n) /= out.Pi.row(n).sum();
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  std::filesystem::create_directories(config.out_dir);

  ExperimentResult result;
  result.repeats.resize(static_cast<std::size_t>(config.n_repeats));
  std::vector<RepeatFiles> files(static_cast<std::size_t>(config.n_repeats));

  std::vector<std::future<RepeatResult>> futures;
  futures.reserve(static_cast<std::size_t>(config.n_repeats));
  for (int r = 0; r < config.n_repeats; ++r) {
    futures.push_back(std::async(std::launch::async, [&, r] {
      return run_repeat(config, r, files[static_cast<std::size_t>(r)]);
    }));
  }
  for (int r = 0; r < config.n_repeats; ++r) {
    result.repeats[static_cast<std::size_t>(r)] = futures[static_cast<std::size_t>(r)].get();
  }

  const std::string agg_path = config.out_dir + "/aggregate.csv";
  std::ofstream agg(agg_path);
  if (!agg) throw std::invalid_argument("cannot write " + agg_path);
  agg << kAggregateHeader << "\n";
  agg << "k,mean_h2,std_h2,n_repeats,n_excluded\n";
  for (int k = 1; k <= config.n_iters; ++k) {
    double sum = 0.0, sumsq = 0.0;
    int m = 0, excluded = 0;
    for (const auto& rep : result.repeats) {
      const double v = rep.h2_mean[static_cast<std::size_t>(k)];
      if (std::isfinite(v)) {
        sum += v;
        sumsq += v * v;
        ++m;
      } else {
        ++excluded;
      }
    }
    const double mean = m > 0 ? sum / m : std::numeric_limits<double>::quiet_NaN();
    const double var = m > 1 ? std::max(0.0, (sumsq - m * mean * mean) / (m - 1)) : 0.0;
    agg << k << "," << format_double(mean) << "," << format_double(std::sqrt(var)) << ","
        << m << "," << excluded << "\n";
  }

  for (const auto& f : files) {
    result.files.insert(result.files.end(), f.paths.begin(), f.paths.end());
  }
  result.files.push_back(agg_path);
  return result;
}

}  // namespace jmls
