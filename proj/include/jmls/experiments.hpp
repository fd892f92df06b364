#pragma once

#include <optional>
#include <string>
#include <vector>

#include "jmls/h2.hpp"
#include "jmls/io.hpp"
#include "jmls/psaem.hpp"

namespace jmls {

/// Uniform draw ranges for randomly generated benchmark models.
struct ParamRanges {
  double a_lo = -1.0, a_hi = 1.0;
  double b_lo = -5.0, b_hi = 5.0;
  double c_lo = -5.0, c_hi = 5.0;
  double q_lo = 0.01, q_hi = 0.1;
  double r_lo = 0.01, r_hi = 0.1;
};

struct ExperimentConfig {
  int example = 1;  ///< 1 or 2, selects the benchmark family
  int T = 0;        ///< 0 = family default (1000 / 2000; paper scale 3000 / 8000)
  int particles = 3;
  int n_iters = 1000;
  int n_repeats = 7;
  std::uint64_t seed = 1;
  bool paper_scale = false;
  double perturb_lo = 0.5, perturb_hi = 1.5;
  double input_filter_pole = 0.9;
  ParamRanges ranges;
  StepSchedule schedule;
  MStepOptions m_step;
  int bode_points = 200;
  bool write_iterate_log = true;
  std::string out_dir = ".";

  int effective_T() const;
  static ExperimentConfig from_json_file(const std::string& path);
};

/// Scalar two-mode benchmark family: n_z = 1, K = 2, A ~ U[-1,1],
/// B, C ~ U[-5,5], D = 0, Q, R ~ U[0.01, 0.1]. Pi rows are Dirichlet(1)
/// draws re-weighted so the self-transition is at least 0.5.
JmlsModel draw_example1_model(Rng& rng, const ParamRanges& ranges = {});

/// Two-dimensional three-mode family: n_z = 2, K = 3, A built from
/// eigenvalues uniform in [-1, 1] conjugated by a random rotation,
/// Q = q I_2 with q ~ U[0.01, 0.1].
JmlsModel draw_example2_model(Rng& rng, const ParamRanges& ranges = {});

/// Multiplicative per-entry perturbation with factors in [lo, hi]: dynamics
/// matrices entrywise, covariances on the upper triangle mirrored and
/// PSD-projected, Pi entrywise then row-renormalized. The initial-state
/// prior is left untouched.
JmlsModel perturb_model(const JmlsModel& model, double lo, double hi, Rng& rng);

struct RepeatResult {
  JmlsModel truth, init, estimate;
  std::vector<double> h2_mean;  ///< indexed by iteration, entry 0 = initial model
};

struct ExperimentResult {
  std::vector<RepeatResult> repeats;
  std::vector<std::string> files;
};

/// Full pipeline per repeat: draw truth, simulate, perturb, identify with
/// per-iteration H2 evaluation; emits per-repeat iterate CSVs, an aggregate
/// CSV and Bode-grid data. Repeats run in parallel on independent derived
/// rng streams (child seed = Rng::derive(seed, repeat_index)).
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace jmls
