#include "jmls/backward_info.hpp"

#include <cmath>
#include <limits>

namespace jmls {

BackwardInfo BackwardInfo::zeros(int T, int n_z) {
  BackwardInfo info;
  info.Omega.assign(T, Matrix::Zero(n_z, n_z));
  info.OmegaHat.assign(T, Matrix::Zero(n_z, n_z));
  info.M.assign(T, Matrix::Identity(n_z, n_z));
  info.lambda.assign(T, Vector::Zero(n_z));
  info.lambdaHat.assign(T, Vector::Zero(n_z));
  info.m.assign(T, Vector::Zero(n_z));
  return info;
}

BackwardInfo backward_recursion(const JmlsModel& model, const std::vector<int>& s_prime,
                                const Dataset& data) {
  const int T = data.T();
  const int n_z = model.dims.n_z;
  if (static_cast<int>(s_prime.size()) != T) {
    throw std::invalid_argument("backward_recursion: reference length mismatch");
  }
  BackwardInfo info = BackwardInfo::zeros(T, n_z);

  for (int t = T - 1; t >= 0; --t) {
    const ModeParams& mode = model.mode(s_prime[t]);
    const Matrix r_chol = spd_cholesky(mode.R, "R of reference mode");
    const Matrix ct_rinv = chol_solve(r_chol, mode.C).transpose();  // C^T R^{-1}
    Vector resid = data.y.row(t).transpose();
    if (model.dims.n_u > 0) resid -= mode.D * data.u.row(t).transpose();

    info.OmegaHat[t] = symmetrized(info.Omega[t] + ct_rinv * mode.C);
    info.lambdaHat[t] = info.lambda[t] + ct_rinv * resid;

    const Matrix f = psd_cholesky(mode.Q, "Q of reference mode");
    info.M[t] = symmetrized(f.transpose() * info.OmegaHat[t] * f + Matrix::Identity(n_z, n_z));

    if (t >= 1) {
      // M_t >= I, so the plain factorization cannot fail.
      const Matrix m_chol = spd_cholesky(info.M[t], "M_t");
      const Matrix shrink =
          Matrix::Identity(n_z, n_z) -
          info.OmegaHat[t] * f * chol_solve(m_chol, f.transpose());
      info.Omega[t - 1] = symmetrized(mode.A.transpose() * shrink * info.OmegaHat[t] * mode.A);
      Vector m_vec = info.lambdaHat[t];
      if (model.dims.n_u > 0) {
        m_vec -= info.OmegaHat[t] * (mode.B * data.u.row(t - 1).transpose());
      }
      info.m[t - 1] = m_vec;
      info.lambda[t - 1] = mode.A.transpose() * (shrink * m_vec);
    }
  }
  return info;
}

Vector ancestor_logweights(const BackwardInfo& info, int t,
                           std::span<const AncestorWeightInputs> particles, const Matrix& Pi,
                           int ref_mode) {
  if (t < 2 || t > info.T()) {
    throw std::invalid_argument("ancestor_logweights: attachment time out of range");
  }
  const Matrix& omega = info.Omega[t - 2];
  const Vector& lambda = info.lambda[t - 2];
  const int n_z = static_cast<int>(omega.rows());

  Vector logw(static_cast<int>(particles.size()));
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const AncestorWeightInputs& p = particles[i];
    const double pi = Pi(p.mode - 1, ref_mode - 1);
    if (pi <= 0.0) {
      logw(static_cast<int>(i)) = -std::numeric_limits<double>::infinity();
      continue;
    }
    const Matrix lam = symmetrized(p.chol.transpose() * omega * p.chol +
                                   Matrix::Identity(n_z, n_z));
    const Matrix lam_chol = spd_cholesky(lam, "Lambda");
    const Vector v = p.chol.transpose() * (lambda - omega * p.filt.mean);
    const Vector w = lam_chol.triangularView<Eigen::Lower>().solve(v);
    const double eta = p.filt.mean.dot(omega * p.filt.mean) -
                       2.0 * lambda.dot(p.filt.mean) - w.squaredNorm();
    const double logdet_lam = 2.0 * lam_chol.diagonal().array().log().sum();
    logw(static_cast<int>(i)) =
        p.log_weight + std::log(pi) - 0.5 * logdet_lam - 0.5 * eta;
  }
  return logw;
}

}  // namespace jmls
