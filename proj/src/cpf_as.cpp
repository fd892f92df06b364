#include "jmls/cpf_as.hpp"

#include <cmath>
#include <string>

namespace jmls {

KernelOutput rb_cpf_as(const JmlsModel& model, const Dataset& data,
                       const std::vector<int>& reference, int N, Rng& rng,
                       const CpfOptions& options) {
  const int T = data.T();
  const int n_z = model.dims.n_z;
  if (N < 2) throw std::invalid_argument("rb_cpf_as: N must be >= 2");
  if (static_cast<int>(reference.size()) != T) {
    throw std::invalid_argument("rb_cpf_as: reference length mismatch");
  }
  const int ref_idx = N - 1;

  // One derived stream per particle plus one for the final selection.
  const std::uint64_t nonce = rng.u64();
  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(N) + 1);
  for (int i = 0; i <= N; ++i) streams.emplace_back(Rng::derive(nonce, i));

  const BackwardInfo info = options.ablate_backward_info
                                ? BackwardInfo::zeros(T, n_z)
                                : backward_recursion(model, reference, data);

  ParticleSystem sys;
  sys.weights = Matrix::Zero(T, N);
  sys.ancestors = Eigen::MatrixXi::Zero(T, N);
  sys.modes = Eigen::MatrixXi::Zero(T, N);
  std::vector<std::vector<GaussianBelief>> pred(T, std::vector<GaussianBelief>(N));
  std::vector<std::vector<GaussianBelief>> filt(T, std::vector<GaussianBelief>(N));
  std::vector<std::vector<Matrix>> gains(T, std::vector<Matrix>(N));
  std::vector<std::vector<double>> logliks(T, std::vector<double>(N));

  // t = 1: modes from the prior (reference pinned), beliefs from the
  // initial-state prior, weights from the predictive density of y_1.
  Vector logw(N);
  for (int i = 0; i < N; ++i) {
    const int s1 = (i == ref_idx) ? reference[0] : streams[i].categorical(model.p_s1) + 1;
    sys.modes(0, i) = s1;
    pred[0][i] = GaussianBelief{model.mu1, model.P1};
    auto upd = kf_update(pred[0][i], model.mode(s1), data.u.row(0).transpose(),
                         data.y.row(0).transpose());
    filt[0][i] = std::move(upd.posterior);
    gains[0][i] = std::move(upd.gain);
    logliks[0][i] = upd.loglik;
    logw(i) = upd.loglik;
  }
  try {
    normalize_log_weights(logw);
  } catch (const std::runtime_error&) {
    throw NumericalError("rb_cpf_as: importance weights collapsed at t=1");
  }
  sys.weights.row(0) = logw;

  for (int t = 1; t < T; ++t) {
    const Vector w_prev = sys.weights.row(t - 1).transpose();

    for (int i = 0; i < ref_idx; ++i) {
      const int a = streams[i].categorical(w_prev);
      sys.ancestors(t, i) = a;
      const int prev_mode = sys.modes(t - 1, a);
      sys.modes(t, i) =
          streams[i].categorical(model.Pi.row(prev_mode - 1).transpose()) + 1;
    }

    sys.modes(t, ref_idx) = reference[t];
    {
      std::vector<AncestorWeightInputs> inputs(static_cast<std::size_t>(N));
      for (int j = 0; j < N; ++j) {
        inputs[j].filt = filt[t - 1][j];
        inputs[j].chol = psd_cholesky(filt[t - 1][j].cov, "filtered covariance");
        inputs[j].mode = sys.modes(t - 1, j);
        inputs[j].log_weight = std::log(w_prev(j));
      }
      Vector anc_logw =
          ancestor_logweights(info, t + 1, inputs, model.Pi, reference[t]);
      try {
        normalize_log_weights(anc_logw);
      } catch (const std::runtime_error&) {
        throw NumericalError("rb_cpf_as: ancestor weights collapsed at t=" +
                             std::to_string(t + 1));
      }
      sys.ancestors(t, ref_idx) = streams[ref_idx].categorical(anc_logw);
    }

    Vector logw_t(N);
    for (int i = 0; i < N; ++i) {
      const int a = sys.ancestors(t, i);
      const ModeParams& mode = model.mode(sys.modes(t, i));
      pred[t][i] = kf_predict(filt[t - 1][a], mode, data.u.row(t - 1).transpose());
      auto upd = kf_update(pred[t][i], mode, data.u.row(t).transpose(),
                           data.y.row(t).transpose());
      filt[t][i] = std::move(upd.posterior);
      gains[t][i] = std::move(upd.gain);
      logliks[t][i] = upd.loglik;
      logw_t(i) = upd.loglik;
    }
    try {
      normalize_log_weights(logw_t);
    } catch (const std::runtime_error&) {
      throw NumericalError("rb_cpf_as: importance weights collapsed at t=" +
                           std::to_string(t + 1));
    }
    sys.weights.row(t) = logw_t;
  }

  KernelOutput out;
  out.system = std::move(sys);
  out.final_weights = out.system.weights.row(T - 1).transpose();
  out.paths.assign(static_cast<std::size_t>(N), std::vector<int>(T));
  out.tracks.assign(static_cast<std::size_t>(N), KalmanTrack{});

  // Flatten each particle's lineage into a contiguous path and track, then
  // smooth it (lines 16-18 run for every particle; the statistics use all
  // of them).
  for (int i = 0; i < N; ++i) {
    KalmanTrack& track = out.tracks[static_cast<std::size_t>(i)];
    track.pred.resize(T);
    track.filt.resize(T);
    track.gain.resize(T);
    track.loglik.resize(T);
    int idx = i;
    for (int t = T - 1; t >= 0; --t) {
      out.paths[static_cast<std::size_t>(i)][t] = out.system.modes(t, idx);
      track.pred[t] = pred[t][idx];
      track.filt[t] = filt[t][idx];
      track.gain[t] = gains[t][idx];
      track.loglik[t] = logliks[t][idx];
      if (t > 0) idx = out.system.ancestors(t, idx);
    }
    rts_smooth(track, out.paths[static_cast<std::size_t>(i)], model);
    lag_one_cross_cov(track, out.paths[static_cast<std::size_t>(i)], model);
  }

  out.selected_index = streams[N].categorical(out.final_weights);
  out.new_reference = out.paths[static_cast<std::size_t>(out.selected_index)];
  return out;
}

SmootherResult mcmc_smoother(const JmlsModel& model, const Dataset& data, int N, int n_iters,
                             int burn_in, Rng& rng, const CpfOptions& options) {
  if (n_iters <= burn_in || burn_in < 0) {
    throw std::invalid_argument("mcmc_smoother: need n_iters > burn_in >= 0");
  }
  const int T = data.T();
  std::vector<int> reference(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) reference[static_cast<std::size_t>(t)] = rng.categorical(model.p_s1) + 1;

  SmootherResult res;
  res.chain.reserve(static_cast<std::size_t>(n_iters));
  res.marginals = Matrix::Zero(T, model.dims.K);
  for (int k = 0; k < n_iters; ++k) {
    KernelOutput out = rb_cpf_as(model, data, reference, N, rng, options);
    reference = out.new_reference;
    res.chain.push_back(reference);
    if (k >= burn_in) {
      for (int t = 0; t < T; ++t) {
        res.marginals(t, reference[static_cast<std::size_t>(t)] - 1) += 1.0;
      }
    }
  }
  res.marginals /= static_cast<double>(n_iters - burn_in);
  return res;
}

double ergodic_average(const std::vector<std::vector<int>>& chain, int burn_in,
                       const std::function<double(const std::vector<int>&)>& h) {
  if (static_cast<int>(chain.size()) <= burn_in) {
    throw std::invalid_argument("ergodic_average: chain shorter than burn-in");
  }
  double acc = 0.0;
  for (std::size_t k = static_cast<std::size_t>(burn_in); k < chain.size(); ++k) {
    acc += h(chain[k]);
  }
  return acc / static_cast<double>(chain.size() - static_cast<std::size_t>(burn_in));
}

}  // namespace jmls
