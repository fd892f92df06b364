#pragma once

#include <functional>
#include <vector>

#include "jmls/cpf_as.hpp"

namespace jmls {

/// Weighted complete-data sufficient statistics over all particles of one
/// kernel application.
///
/// S3 holds one d x d second-moment matrix per mode, d = 3 n_z + 2 n_u + n_y,
/// over the stacked vector [z_t | z_{t-1}, u_{t-1} | y_t | z_t, u_t].
/// Transition-related sums (S1, S2q and the first superblock of S3) run over
/// t = 2..T; measurement-related sums (S2m and the second superblock) over
/// t = 1..T.
struct SuffStats {
  Matrix S1;               // K x K weighted transition counts
  Vector S2m;              // K measurement occupancies
  Vector S2q;              // K transition occupancies
  std::vector<Matrix> S3;  // K of d x d

  static SuffStats zeros(const Dims& dims);
  static int stacked_dim(const Dims& dims) { return 3 * dims.n_z + 2 * dims.n_u + dims.n_y; }
};

/// The stochastic-approximation running statistic has the same shape.
using SmoothedStats = SuffStats;

/// gamma_k = 1 for k <= burn_in, (k - burn_in)^(-exponent) afterwards.
/// exponent in (0.5, 1] keeps sum(gamma) divergent and sum(gamma^2) finite.
struct StepSchedule {
  int burn_in = 100;
  double exponent = 0.7;
  double gamma(int k) const;
};

struct MStepOptions {
  /// Use the measurement occupancy as the divisor for both Q and R (the
  /// folded single-count convention) instead of the split transition /
  /// measurement counts. Off by default; see README.
  bool single_occupancy = false;
  /// Mode-starvation threshold is occupancy_floor_scale * T.
  double occupancy_floor_scale = 1e-6;
};

/// Accumulate (18)-(21)-style statistics from one kernel output, weighting
/// each particle's smoothed moments by its final importance weight.
SuffStats compute_suffstats(const KernelOutput& kernel_out, const Dataset& data,
                            const Dims& dims);

/// Elementwise (1 - gamma) * prev + gamma * cur.
SuffStats sa_update(const SuffStats& prev, const SuffStats& cur, double gamma);

struct MStepResult {
  JmlsModel model;
  std::vector<int> starved_modes;  // 1-based modes carried over unchanged
};

/// Closed-form maximizer of the smoothed intermediate quantity. Starved
/// modes (occupancy below threshold, or a singular regression Gram matrix)
/// keep their previous parameters.
MStepResult m_step(const SmoothedStats& stats, const Dims& dims, const JmlsModel& prev,
                   const MStepOptions& options = {});

/// The smoothed intermediate quantity up to an additive constant:
/// sum S1 log pi - 0.5 sum_n [S2q_n log|Q_n| + S2m_n log|R_n| + tr(H_n S3_n)]
/// with H_n the residual quadratic form. Diagnostics and tests only.
double q_hat_value(const SmoothedStats& stats, const JmlsModel& theta,
                   const MStepOptions& options = {});

struct PsaemState {
  JmlsModel theta;
  SmoothedStats stats;
  std::vector<int> reference;
  int iteration = 0;
};

struct PsaemDiagnostics {
  int k = 0;
  double gamma = 0.0;
  std::vector<int> starved_modes;
  const KernelOutput* kernel = nullptr;
};

using PsaemCallback = std::function<void(const PsaemState&, const PsaemDiagnostics&)>;

struct PsaemOptions {
  MStepOptions m_step;
  CpfOptions kernel;
  int history_tail = 0;  ///< keep the last history_tail parameter iterates
};

struct PsaemRun {
  PsaemState state;
  std::vector<JmlsModel> history;
};

/// RB-PSAEM outer loop: per iteration draw from the kernel under the current
/// parameters, fold the statistics into the running SA average, and maximize
/// in closed form. The callback sees every iterate.
PsaemRun rb_psaem(const JmlsModel& model0, const Dataset& data, int N, int n_iters,
                  const StepSchedule& schedule, Rng& rng, const PsaemCallback& callback = {},
                  const PsaemOptions& options = {});

/// Continue a checkpointed run; the schedule is evaluated at the absolute
/// iteration counter, so a resumed run reproduces an uninterrupted one given
/// the same rng state.
PsaemRun rb_psaem_continue(PsaemState state, const Dataset& data, int N, int n_iters,
                           const StepSchedule& schedule, Rng& rng,
                           const PsaemCallback& callback = {}, const PsaemOptions& options = {});

}  // namespace jmls
