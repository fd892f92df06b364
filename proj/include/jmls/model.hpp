#pragma once

#include <string>
#include <utility>
#include <vector>

#include "jmls/gaussian.hpp"
#include "jmls/rng.hpp"

namespace jmls {

/// Problem sizes. Modes are numbered 1..K in every interface; only array
/// subscripts are 0-based.
struct Dims {
  int n_z = 1;  ///< latent linear state dimension
  int n_y = 1;  ///< output dimension
  int n_u = 0;  ///< input dimension (0 = autonomous)
  int K = 1;    ///< number of modes
  int T = 1;    ///< horizon length
};

/// Per-mode linear system matrices and noise covariances.
struct ModeParams {
  Matrix A;  // n_z x n_z
  Matrix B;  // n_z x n_u
  Matrix C;  // n_y x n_z
  Matrix D;  // n_y x n_u
  Matrix Q;  // n_z x n_z, symmetric PSD
  Matrix R;  // n_y x n_y, symmetric PD
};

/// Complete parameter set: mode dynamics, the mode transition matrix, and
/// the initial-state prior (s_1 ~ p_s1, z_1 ~ N(mu1, P1)).
struct JmlsModel {
  Dims dims;
  std::vector<ModeParams> modes;  // size K
  Matrix Pi;                      // K x K, rows sum to 1
  Vector p_s1;                    // K
  Vector mu1;                     // n_z
  Matrix P1;                      // n_z x n_z

  /// Mode parameters by 1-based mode number.
  const ModeParams& mode(int s) const { return modes[static_cast<std::size_t>(s - 1)]; }
  ModeParams& mode(int s) { return modes[static_cast<std::size_t>(s - 1)]; }

  /// Zero-initialized matrices of the right shapes, uniform p_s1, mu1 = 0,
  /// P1 = I. Callers fill in the dynamics.
  static JmlsModel with_defaults(const Dims& dims);
};

struct Dataset {
  Matrix u;  // T x n_u
  Matrix y;  // T x n_y
  int T() const { return static_cast<int>(y.rows()); }
};

struct Trajectory {
  std::vector<int> s;  // length T, values in 1..K
  Matrix z;            // T x n_z
};

/// Check every model invariant. Violations are data, not faults: returns a
/// human-readable description per violation, empty iff the model is usable.
/// Inference requires strictly positive-definite R; the simulator only needs
/// PSD (noise-free models are legitimate data generators), hence the switch.
std::vector<std::string> validate_model(const JmlsModel& model, bool require_pd_R = true);

/// Draw (y, u-aligned) data plus the latent trajectory. Timing: y_1 is
/// emitted from (s_1, z_1) with no preceding transition; the transition into
/// time t+1 uses mode s_{t+1} and input u_t. Identical seeds give
/// bit-identical output.
std::pair<Dataset, Trajectory> simulate(const JmlsModel& model, const Matrix& u, Rng& rng);

/// Low-pass filtered white noise: u_t = pole*u_{t-1} + e_t with e_t ~ N(0, I)
/// and u_0 = 0. Returns a T x n_u matrix.
Matrix generate_input(int T, int n_u, double filter_pole, Rng& rng);

}  // namespace jmls
