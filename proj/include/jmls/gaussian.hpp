#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace jmls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a computation fails for numerical reasons (singular innovation
/// covariance, weight collapse, ...). The CLI maps it to exit code 2.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Gaussian posterior/predictive moments for the conditionally linear state.
struct GaussianBelief {
  Vector mean;
  Matrix cov;
};

/// Lower Cholesky factor of a PSD matrix. The zero matrix factors to zero;
/// otherwise failures are retried with jitter 1e-9*trace/n escalating by 10x
/// up to 1e-3*trace/n before raising NumericalError.
Matrix psd_cholesky(const Matrix& m, const std::string& label);

/// Lower Cholesky factor of an SPD matrix, no jitter. Throws NumericalError
/// on failure (signals a degenerate covariance).
Matrix spd_cholesky(const Matrix& m, const std::string& label);

/// Solve M x = b for SPD M via its lower Cholesky factor.
Matrix chol_solve(const Matrix& chol_lower, const Matrix& b);

/// log N(x | mean, L L^T) given the lower Cholesky factor of the covariance.
double gaussian_logpdf_chol(const Vector& x, const Vector& mean, const Matrix& chol_lower);

/// log N(x | mean, cov); cov must be strictly positive definite.
double gaussian_logpdf(const Vector& x, const Vector& mean, const Matrix& cov);

/// Project a symmetric matrix onto the PSD cone by clipping eigenvalues
/// below floor_scale*trace (evaluated before clipping).
Matrix psd_project(const Matrix& m, double floor_scale = 1e-12);

}  // namespace jmls
