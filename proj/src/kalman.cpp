#include "jmls/kalman.hpp"

#include <numeric>

namespace jmls {

double KalmanTrack::total_loglik() const {
  return std::accumulate(loglik.begin(), loglik.end(), 0.0);
}

GaussianBelief kf_predict(const GaussianBelief& belief, const ModeParams& mode, const Vector& u) {
  if (mode.A.cols() != belief.mean.size()) {
    throw std::invalid_argument("kf_predict: state dimension mismatch");
  }
  GaussianBelief out;
  out.mean = mode.A * belief.mean;
  if (u.size() > 0) out.mean += mode.B * u;
  out.cov = symmetrized(mode.A * belief.cov * mode.A.transpose() + mode.Q);
  return out;
}

KfUpdateResult kf_update(const GaussianBelief& pred, const ModeParams& mode, const Vector& u,
                         const Vector& y) {
  if (mode.C.cols() != pred.mean.size() || y.size() != mode.C.rows()) {
    throw std::invalid_argument("kf_update: dimension mismatch");
  }
  Vector innovation = y - mode.C * pred.mean;
  if (u.size() > 0) innovation -= mode.D * u;
  const Matrix s_cov = symmetrized(mode.C * pred.cov * mode.C.transpose() + mode.R);
  const Matrix s_chol = spd_cholesky(s_cov, "innovation covariance");

  KfUpdateResult out;
  out.gain = chol_solve(s_chol, mode.C * pred.cov).transpose();
  out.posterior.mean = pred.mean + out.gain * innovation;
  const Matrix ikc =
      Matrix::Identity(pred.mean.size(), pred.mean.size()) - out.gain * mode.C;
  out.posterior.cov = symmetrized(ikc * pred.cov * ikc.transpose() +
                                  out.gain * mode.R * out.gain.transpose());
  out.loglik = gaussian_logpdf_chol(innovation, Vector::Zero(y.size()), s_chol);
  return out;
}

double predictive_loglik(const GaussianBelief& pred, const ModeParams& mode, const Vector& u,
                         const Vector& y) {
  Vector mean = mode.C * pred.mean;
  if (u.size() > 0) mean += mode.D * u;
  const Matrix s_cov = symmetrized(mode.C * pred.cov * mode.C.transpose() + mode.R);
  return gaussian_logpdf_chol(y, mean, spd_cholesky(s_cov, "innovation covariance"));
}

KalmanTrack filter_fixed_modes(const JmlsModel& model, const std::vector<int>& s,
                               const Dataset& data) {
  const int T = data.T();
  if (static_cast<int>(s.size()) != T) {
    throw std::invalid_argument("filter_fixed_modes: mode sequence length mismatch");
  }
  KalmanTrack track;
  track.pred.resize(T);
  track.filt.resize(T);
  track.loglik.resize(T);
  track.gain.resize(T);

  GaussianBelief belief{model.mu1, model.P1};
  for (int t = 0; t < T; ++t) {
    const ModeParams& mode = model.mode(s[t]);
    const Vector u_t = data.u.row(t).transpose();
    if (t == 0) {
      track.pred[0] = belief;  // no transition precedes time 1
    } else {
      track.pred[t] = kf_predict(belief, mode, data.u.row(t - 1).transpose());
    }
    auto upd = kf_update(track.pred[t], mode, u_t, data.y.row(t).transpose());
    belief = upd.posterior;
    track.filt[t] = std::move(upd.posterior);
    track.loglik[t] = upd.loglik;
    track.gain[t] = std::move(upd.gain);
  }
  return track;
}

void rts_smooth(KalmanTrack& track, const std::vector<int>& s, const JmlsModel& model) {
  const int T = track.T();
  if (static_cast<int>(s.size()) != T) {
    throw std::invalid_argument("rts_smooth: mode sequence length mismatch");
  }
  track.smooth.assign(T, GaussianBelief{});
  track.smoother_gain.assign(std::max(T - 1, 0), Matrix());
  track.smooth[T - 1] = track.filt[T - 1];
  for (int t = T - 2; t >= 0; --t) {
    const Matrix& a_next = model.mode(s[t + 1]).A;
    // J_t = P_{f;t} A_{t+1}^T P_{p;t+1}^{-1}, via factor-and-solve.
    const Matrix p_pred_chol = psd_cholesky(track.pred[t + 1].cov, "predicted covariance");
    const Matrix j = chol_solve(p_pred_chol, a_next * track.filt[t].cov).transpose();
    track.smoother_gain[t] = j;
    track.smooth[t].mean =
        track.filt[t].mean + j * (track.smooth[t + 1].mean - track.pred[t + 1].mean);
    track.smooth[t].cov = symmetrized(
        track.filt[t].cov +
        j * (track.smooth[t + 1].cov - track.pred[t + 1].cov) * j.transpose());
  }
}

void lag_one_cross_cov(KalmanTrack& track, const std::vector<int>& s, const JmlsModel& model) {
  const int T = track.T();
  if (!track.has_smooth()) {
    throw std::logic_error("lag_one_cross_cov: run rts_smooth first");
  }
  track.lag_one.assign(T, Matrix());
  if (T < 2) return;
  const int n_z = model.dims.n_z;
  const Matrix& c_last = model.mode(s[T - 1]).C;
  const Matrix& a_last = model.mode(s[T - 1]).A;
  track.lag_one[T - 1] =
      (Matrix::Identity(n_z, n_z) - track.gain[T - 1] * c_last) * a_last *
      track.filt[T - 2].cov;
  for (int t = T - 2; t >= 1; --t) {
    const Matrix& a_next = model.mode(s[t + 1]).A;
    track.lag_one[t] =
        track.filt[t].cov * track.smoother_gain[t - 1].transpose() +
        track.smoother_gain[t] *
            (track.lag_one[t + 1] - a_next * track.filt[t].cov) *
            track.smoother_gain[t - 1].transpose();
  }
}

}  // namespace jmls
