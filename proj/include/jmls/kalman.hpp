#pragma once

#include <vector>

#include "jmls/gaussian.hpp"
#include "jmls/model.hpp"

namespace jmls {

/// Per-time Kalman quantities along one mode sequence. All arrays are indexed
/// 0-based for times 1..T. smoother_gain[t] is the gain linking time t+1 to
/// t+2 (defined for t = 0..T-2); lag_one[t] is Cov(z_{t+1}, z_t | y_{1:T})
/// (defined for t = 1..T-1, slot 0 unused).
struct KalmanTrack {
  std::vector<GaussianBelief> pred;
  std::vector<GaussianBelief> filt;
  std::vector<double> loglik;
  std::vector<Matrix> gain;
  std::vector<GaussianBelief> smooth;
  std::vector<Matrix> smoother_gain;
  std::vector<Matrix> lag_one;

  int T() const { return static_cast<int>(filt.size()); }
  double total_loglik() const;
  bool has_smooth() const { return !smooth.empty(); }
};

/// Time update: mean' = A mean + B u, cov' = A cov A^T + Q.
GaussianBelief kf_predict(const GaussianBelief& belief, const ModeParams& mode, const Vector& u);

struct KfUpdateResult {
  GaussianBelief posterior;
  double loglik;  ///< log N(y; C z_p + D u, C P_p C^T + R)
  Matrix gain;    ///< n_z x n_y
};

/// Measurement update in Joseph form; also returns the predictive
/// log-likelihood increment. Throws NumericalError when the innovation
/// covariance is not invertible.
KfUpdateResult kf_update(const GaussianBelief& pred, const ModeParams& mode, const Vector& u,
                         const Vector& y);

/// log N(y; C z_p + D u, C P_p C^T + R) without forming the posterior.
double predictive_loglik(const GaussianBelief& pred, const ModeParams& mode, const Vector& u,
                         const Vector& y);

/// Run the filter over the whole dataset with the given 1-based mode
/// sequence, starting from the model's initial-state prior.
KalmanTrack filter_fixed_modes(const JmlsModel& model, const std::vector<int>& s,
                               const Dataset& data);

/// Backward pass filling smoothed beliefs and smoother gains.
void rts_smooth(KalmanTrack& track, const std::vector<int>& s, const JmlsModel& model);

/// Fill lag-one smoothed cross-covariances; requires rts_smooth first.
void lag_one_cross_cov(KalmanTrack& track, const std::vector<int>& s, const JmlsModel& model);

}  // namespace jmls
