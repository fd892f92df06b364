#include "jmls/h2.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

namespace jmls {

namespace {
constexpr double kStabilityTol = 1.0 - 1e-9;
}

double spectral_radius(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  return A.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix solve_discrete_lyapunov(const Matrix& A, const Matrix& W) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n || W.rows() != n || W.cols() != n) {
    throw std::invalid_argument("solve_discrete_lyapunov: shape mismatch");
  }
  if (n > 30) {
    throw std::invalid_argument("solve_discrete_lyapunov: dense vectorization guard (n > 30)");
  }
  if (spectral_radius(A) >= kStabilityTol) {
    throw std::invalid_argument("solve_discrete_lyapunov: A is not Schur stable");
  }
  Matrix kron(n * n, n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      kron.block(i * n, j * n, n, n) = A(i, j) * A;
    }
  }
  const Matrix lhs = Matrix::Identity(n * n, n * n) - kron;
  Eigen::Map<const Vector> w_vec(W.data(), n * n);
  Vector p_vec = lhs.colPivHouseholderQr().solve(w_vec);
  Matrix P = Eigen::Map<Matrix>(p_vec.data(), n, n);
  return symmetrized(P);
}

double h2_error(const ModeParams& truth, const ModeParams& est) {
  const int n_t = static_cast<int>(truth.A.rows());
  const int n_e = static_cast<int>(est.A.rows());
  const int n_u = static_cast<int>(truth.B.cols());
  const int n_y = static_cast<int>(truth.C.rows());
  if (n_u < 1) throw std::invalid_argument("h2_error: requires at least one input");
  if (est.B.cols() != n_u || est.C.rows() != n_y) {
    throw std::invalid_argument("h2_error: channel count mismatch");
  }
  if (spectral_radius(truth.A) >= kStabilityTol || spectral_radius(est.A) >= kStabilityTol) {
    return std::numeric_limits<double>::infinity();
  }

  Matrix a_err = Matrix::Zero(n_t + n_e, n_t + n_e);
  a_err.topLeftCorner(n_t, n_t) = truth.A;
  a_err.bottomRightCorner(n_e, n_e) = est.A;
  Matrix b_err(n_t + n_e, n_u);
  b_err << truth.B, est.B;
  Matrix c_err(n_y, n_t + n_e);
  c_err << truth.C, -est.C;
  const Matrix d_err = truth.D - est.D;

  const Matrix P = solve_discrete_lyapunov(a_err, b_err * b_err.transpose());
  const double sq = (c_err * P * c_err.transpose() + d_err * d_err.transpose()).trace();
  return std::sqrt(std::max(sq, 0.0));
}

H2Report match_modes(const JmlsModel& truth, const JmlsModel& est) {
  const int K = truth.dims.K;
  if (est.dims.K != K) throw std::invalid_argument("match_modes: mode counts differ");
  if (K > 5) throw std::invalid_argument("match_modes: exhaustive matching guarded at K <= 5");

  Matrix errs(K, K);  // errs(n, m) = h2_error(true mode n+1, est mode m+1)
  for (int n = 0; n < K; ++n) {
    for (int m = 0; m < K; ++m) {
      errs(n, m) = h2_error(truth.mode(n + 1), est.mode(m + 1));
    }
  }

  std::vector<int> perm(static_cast<std::size_t>(K));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_sum = std::numeric_limits<double>::infinity();
  do {
    double sum = 0.0;
    for (int n = 0; n < K; ++n) sum += errs(n, perm[static_cast<std::size_t>(n)]);
    if (sum < best_sum) {
      best_sum = sum;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  H2Report report;
  report.permutation.resize(static_cast<std::size_t>(K));
  report.per_mode.resize(static_cast<std::size_t>(K));
  double acc = 0.0;
  int n_finite = 0;
  for (int n = 0; n < K; ++n) {
    const int m = best[static_cast<std::size_t>(n)];
    report.permutation[static_cast<std::size_t>(n)] = m + 1;
    const double e = errs(n, m);
    report.per_mode[static_cast<std::size_t>(n)] = e;
    if (std::isfinite(e)) {
      acc += e;
      ++n_finite;
    } else {
      ++report.n_unstable;
    }
  }
  report.mean = n_finite > 0 ? acc / n_finite : std::numeric_limits<double>::infinity();
  return report;
}

std::vector<BodePoint> bode_grid(const JmlsModel& model, int n_points, double omega_lo,
                                 double omega_hi) {
  using Complexd = std::complex<double>;
  const Dims& dims = model.dims;
  std::vector<BodePoint> out;
  out.reserve(static_cast<std::size_t>(dims.K * dims.n_u * dims.n_y * n_points));
  const double log_lo = std::log(omega_lo);
  const double log_hi = std::log(omega_hi);
  for (int n = 1; n <= dims.K; ++n) {
    const ModeParams& mode = model.mode(n);
    const Eigen::MatrixXcd A = mode.A.cast<Complexd>();
    for (int p = 0; p < n_points; ++p) {
      const double omega =
          std::exp(log_lo + (log_hi - log_lo) * p / std::max(n_points - 1, 1));
      const Complexd z = std::polar(1.0, omega);
      Eigen::MatrixXcd resolvent =
          (z * Eigen::MatrixXcd::Identity(dims.n_z, dims.n_z) - A)
              .colPivHouseholderQr()
              .solve(mode.B.cast<Complexd>());
      Eigen::MatrixXcd H = mode.C.cast<Complexd>() * resolvent + mode.D.cast<Complexd>();
      for (int iu = 0; iu < dims.n_u; ++iu) {
        for (int iy = 0; iy < dims.n_y; ++iy) {
          out.push_back(BodePoint{n, iu + 1, iy + 1, omega, std::abs(H(iy, iu)),
                                  std::arg(H(iy, iu))});
        }
      }
    }
  }
  return out;
}

}  // namespace jmls
