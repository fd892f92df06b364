#pragma once

#include <vector>

#include "jmls/kalman.hpp"
#include "jmls/model.hpp"

namespace jmls::testutil {

/// Exact smoothing quantities from the explicit joint Gaussian of
/// (z_{1:T}, y_{1:T}) conditional on a fixed mode sequence. Independent of
/// the recursive filter/smoother implementations; guarded at T * n_z <= 400.
struct JointGaussianResult {
  std::vector<Vector> mean;     // smoothed means, size T
  std::vector<Matrix> cov;      // smoothed covariances, size T
  std::vector<Matrix> lag_one;  // Cov(z_{t+1}, z_t | y_{1:T}), slot t+1 as in KalmanTrack
  double loglik = 0.0;          // log N(y_{1:T}; ...)
};
JointGaussianResult joint_gaussian_oracle(const JmlsModel& model, const std::vector<int>& s,
                                          const Dataset& data);

/// Exact log p(y_{t:T}, s'_{t:T} | history) by running a Kalman filter from
/// the particle's filtered belief over the fixed future modes, accumulating
/// transition log-probabilities and predictive log-likelihoods. For t == 1
/// pass mode_prev = 0: the filter starts from the model prior and the first
/// factor is log p_s1(s'_1).
double ancestor_weight_oracle(const JmlsModel& model, const GaussianBelief& filt_prev,
                              int mode_prev, const std::vector<int>& s_future,
                              const Dataset& data, int t);

/// Exact posterior over all K^T mode sequences (guarded at K^T <= 2^20),
/// each scored by mode-prior log-probability plus filter log-likelihood.
struct Enumeration {
  std::vector<std::vector<int>> sequences;
  Vector log_post;  // normalized
  Vector post;
};
Enumeration enumerate_posterior(const JmlsModel& model, const Dataset& data);

/// Chi-square goodness-of-fit with pooling of cells whose expected count is
/// below min_expected (pooled into one remainder cell).
struct ChiSquareTest {
  double stat = 0.0;
  int df = 0;
  double pvalue = 1.0;
};
ChiSquareTest chi_square_gof(const std::vector<long>& counts, const Vector& probs,
                             double min_expected = 5.0);
double chi_square_pvalue(double stat, int df);

/// Reference EM for the single-mode linear-Gaussian model: exact E-step from
/// the Kalman smoother with hand-assembled statistics, closed-form M-step.
JmlsModel direct_em_lgss(const JmlsModel& theta0, const Dataset& data, int n_iters);

/// Random valid model with spectral radius of every A_n below radius_cap
/// and strictly positive-definite noise covariances; for randomized tests.
JmlsModel random_model(Rng& rng, int K, int n_z, int n_y, int n_u, int T,
                       double radius_cap = 0.95);

}  // namespace jmls::testutil
