#pragma once

#include <functional>
#include <vector>

#include "jmls/backward_info.hpp"

namespace jmls {

/// Per-time diagnostics of one kernel application. Row t of each matrix
/// covers particles i = 1..N (0-based columns); ancestors row 0 is unused.
struct ParticleSystem {
  Matrix weights;            // T x N, rows sum to 1
  Eigen::MatrixXi ancestors; // T x N, 0-based particle indices
  Eigen::MatrixXi modes;     // T x N, 1-based mode values
};

/// Result of one draw from the kernel: the selected trajectory, the full
/// weighted particle set, and per-particle smoothed tracks (with lag-one
/// cross-covariances) along each flattened path.
struct KernelOutput {
  std::vector<int> new_reference;
  int selected_index = -1;
  std::vector<std::vector<int>> paths;   // N flattened mode paths
  Vector final_weights;                  // N, sums to 1
  std::vector<KalmanTrack> tracks;       // N, smoothed
  ParticleSystem system;
};

struct CpfOptions {
  /// Force Omega = 0, lambda = 0 in the ancestor weights, reducing them to
  /// w_{t-1} * pi. For diagnostics and tests only.
  bool ablate_backward_info = false;
};

/// One application of the Rao-Blackwellized conditional particle filter with
/// ancestor sampling. Particle N is pinned to the reference; its ancestry is
/// resampled with backward-information weights. Requires N >= 2.
///
/// Randomness: the caller's rng supplies a single nonce; particle i uses the
/// derived stream Rng::derive(nonce, i) for its draws (initial mode, then
/// ancestor and mode per step), and stream N drives the final selection, so
/// results do not depend on the order particles are processed.
KernelOutput rb_cpf_as(const JmlsModel& model, const Dataset& data,
                       const std::vector<int>& reference, int N, Rng& rng,
                       const CpfOptions& options = {});

struct SmootherResult {
  std::vector<std::vector<int>> chain;  // n_iters sampled trajectories
  Matrix marginals;                     // T x K ergodic mode frequencies past burn-in
};

/// Markov chain smoother: iterate the kernel from an arbitrary start and
/// collect the sampled trajectories.
SmootherResult mcmc_smoother(const JmlsModel& model, const Dataset& data, int N, int n_iters,
                             int burn_in, Rng& rng, const CpfOptions& options = {});

/// Ergodic average (1/(n - burn_in)) sum_{k > burn_in} h(s[k]).
double ergodic_average(const std::vector<std::vector<int>>& chain, int burn_in,
                       const std::function<double(const std::vector<int>&)>& h);

}  // namespace jmls
