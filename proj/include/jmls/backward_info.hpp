#pragma once

#include <span>
#include <vector>

#include "jmls/kalman.hpp"

namespace jmls {

/// Backward information statistics of the reference mode sequence. The
/// future likelihood of (y_{t+1:T}, s'_{t+1:T}) as a function of z_t is
/// proportional to exp(-0.5 z^T Omega[t] z + lambda[t]^T z), arrays indexed
/// 0-based for times 1..T with Omega[T-1] = 0, lambda[T-1] = 0.
///
/// m[t] is the linear statistic entering lambda[t]; it combines the hatted
/// quantities at t+1 with the input that drives the transition into t+1
/// (the one-step-earlier input, matching the model timing).
struct BackwardInfo {
  std::vector<Matrix> Omega, OmegaHat, M;
  std::vector<Vector> lambda, lambdaHat, m;

  int T() const { return static_cast<int>(Omega.size()); }
  static BackwardInfo zeros(int T, int n_z);
};

/// Backward recursion along the reference trajectory. Mode subscripts are
/// taken from s_prime (A_t = A_{s'_t} and so on).
BackwardInfo backward_recursion(const JmlsModel& model, const std::vector<int>& s_prime,
                                const Dataset& data);

/// One particle's inputs to the ancestor-sampling weight at time t: its
/// filtered belief at t-1, the lower Cholesky factor of that covariance,
/// its mode at t-1, and its normalized log importance weight.
struct AncestorWeightInputs {
  GaussianBelief filt;
  Matrix chol;
  int mode;
  double log_weight;
};

/// Unnormalized ancestor-sampling log-weights at attachment time t (1-based,
/// 2 <= t <= T): log w_{t-1}^i + log pi_{s_{t-1}^i, s'_t}
/// - 0.5 log|Lambda_i| - 0.5 eta_i, with Lambda_i = Gamma^T Omega_{t-1} Gamma + I
/// and eta_i the completed-square quadratic in the particle's filtered
/// moments. Particle-independent constants are dropped.
Vector ancestor_logweights(const BackwardInfo& info, int t,
                           std::span<const AncestorWeightInputs> particles, const Matrix& Pi,
                           int ref_mode);

}  // namespace jmls
