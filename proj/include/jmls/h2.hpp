#pragma once

#include <vector>

#include "jmls/model.hpp"

namespace jmls {

/// Solve P = A P A^T + W for symmetric W by dense vectorization
/// (I - A (x) A) vec(P) = vec(W). Requires spectral radius < 1 and modest
/// dimension (the error systems here are tiny).
Matrix solve_discrete_lyapunov(const Matrix& A, const Matrix& W);

double spectral_radius(const Matrix& A);

/// H2 norm of the transfer-function difference between two modes, via the
/// block-diagonal error realization and a discrete Lyapunov equation.
/// Unstable systems report +inf rather than fault.
double h2_error(const ModeParams& truth, const ModeParams& est);

struct H2Report {
  std::vector<double> per_mode;  ///< under the best permutation, +inf if unstable
  double mean = 0.0;             ///< over finite entries; +inf if none finite
  std::vector<int> permutation;  ///< est mode matched to true mode n is permutation[n-1] (1-based)
  int n_unstable = 0;
};

/// Exhaustive mode matching (K <= 5): pick the permutation of estimated
/// modes minimizing the summed H2 error against the true modes.
H2Report match_modes(const JmlsModel& truth, const JmlsModel& est);

struct BodePoint {
  int mode, iu, iy;   // 1-based
  double omega;       // rad/sample
  double mag, phase;
};

/// Frequency response per mode and channel on a log-spaced grid.
std::vector<BodePoint> bode_grid(const JmlsModel& model, int n_points = 200,
                                 double omega_lo = 1e-3, double omega_hi = M_PI);

}  // namespace jmls
