#include "jmls/gaussian.hpp"

#include <cmath>

namespace jmls {

Matrix psd_cholesky(const Matrix& m, const std::string& label) {
  const int n = static_cast<int>(m.rows());
  if (m.isZero(0.0)) return Matrix::Zero(n, n);
  Matrix sym = symmetrized(m);
  const double base = std::max(sym.trace() / n, 0.0);
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  for (double scale = 1e-9; scale <= 1e-3 + 1e-18; scale *= 10.0) {
    const double jitter = scale * (base > 0.0 ? base : 1.0);
    llt.compute(sym + jitter * Matrix::Identity(n, n));
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw NumericalError(label + ": matrix not PSD within jitter tolerance");
}

Matrix spd_cholesky(const Matrix& m, const std::string& label) {
  Eigen::LLT<Matrix> llt(symmetrized(m));
  if (llt.info() != Eigen::Success) {
    throw NumericalError(label + ": matrix not positive definite");
  }
  return llt.matrixL();
}

Matrix chol_solve(const Matrix& chol_lower, const Matrix& b) {
  Matrix x = chol_lower.triangularView<Eigen::Lower>().solve(b);
  return chol_lower.transpose().triangularView<Eigen::Upper>().solve(x);
}

double gaussian_logpdf_chol(const Vector& x, const Vector& mean, const Matrix& chol_lower) {
  const int k = static_cast<int>(x.size());
  const Vector z = chol_lower.triangularView<Eigen::Lower>().solve(x - mean);
  const double logdet = 2.0 * chol_lower.diagonal().array().log().sum();
  return -0.5 * (k * std::log(2.0 * M_PI) + logdet + z.squaredNorm());
}

double gaussian_logpdf(const Vector& x, const Vector& mean, const Matrix& cov) {
  return gaussian_logpdf_chol(x, mean, spd_cholesky(cov, "gaussian_logpdf covariance"));
}

Matrix psd_project(const Matrix& m, double floor_scale) {
  Matrix sym = symmetrized(m);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const double floor = floor_scale * std::max(sym.trace(), 0.0);
  Vector d = eig.eigenvalues();
  bool clipped = false;
  for (int i = 0; i < d.size(); ++i) {
    if (d(i) < floor) {
      d(i) = floor;
      clipped = true;
    }
  }
  if (!clipped) return sym;
  return symmetrized(eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose());
}

}  // namespace jmls
