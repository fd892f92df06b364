#include "jmls/psaem.hpp"

#include <cmath>
#include <deque>
#include <string>

namespace jmls {

namespace {

// Block offsets into the stacked vector [z_t | z_{t-1}, u_{t-1} | y_t | z_t, u_t].
struct Blocks {
  int z_cur, z_prev, u_prev, y, z_meas, u_cur, d;
  explicit Blocks(const Dims& dims) {
    z_cur = 0;
    z_prev = dims.n_z;
    u_prev = 2 * dims.n_z;
    y = 2 * dims.n_z + dims.n_u;
    z_meas = y + dims.n_y;
    u_cur = z_meas + dims.n_z;
    d = u_cur + dims.n_u;
  }
};

bool well_conditioned(const Matrix& gram, double rel = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  return hi > 0.0 && lo > rel * hi;
}

}  // namespace

SuffStats SuffStats::zeros(const Dims& dims) {
  SuffStats s;
  s.S1 = Matrix::Zero(dims.K, dims.K);
  s.S2m = Vector::Zero(dims.K);
  s.S2q = Vector::Zero(dims.K);
  s.S3.assign(static_cast<std::size_t>(dims.K), Matrix::Zero(stacked_dim(dims), stacked_dim(dims)));
  return s;
}

double StepSchedule::gamma(int k) const {
  if (exponent <= 0.5 || exponent > 1.0) {
    throw std::invalid_argument("StepSchedule: exponent must lie in (0.5, 1]");
  }
  if (k <= burn_in) return 1.0;
  return std::pow(static_cast<double>(k - burn_in), -exponent);
}

SuffStats compute_suffstats(const KernelOutput& kernel_out, const Dataset& data,
                            const Dims& dims) {
  const int T = data.T();
  const int N = static_cast<int>(kernel_out.paths.size());
  const Blocks b(dims);
  SuffStats stats = SuffStats::zeros(dims);

  for (int i = 0; i < N; ++i) {
    const double w = kernel_out.final_weights(i);
    if (w == 0.0) continue;
    const auto& path = kernel_out.paths[static_cast<std::size_t>(i)];
    const KalmanTrack& track = kernel_out.tracks[static_cast<std::size_t>(i)];
    if (!track.has_smooth() || track.lag_one.empty()) {
      throw std::invalid_argument("compute_suffstats: kernel output lacks smoothed tracks");
    }
    Vector xi = Vector::Zero(b.d);
    Matrix cov = Matrix::Zero(b.d, b.d);
    for (int t = 0; t < T; ++t) {
      const int n = path[static_cast<std::size_t>(t)] - 1;
      stats.S2m(n) += w;

      xi.setZero();
      cov.setZero();
      xi.segment(b.y, dims.n_y) = data.y.row(t).transpose();
      xi.segment(b.z_meas, dims.n_z) = track.smooth[t].mean;
      if (dims.n_u > 0) xi.segment(b.u_cur, dims.n_u) = data.u.row(t).transpose();
      cov.block(b.z_meas, b.z_meas, dims.n_z, dims.n_z) = track.smooth[t].cov;

      if (t >= 1) {
        const int prev = path[static_cast<std::size_t>(t - 1)] - 1;
        stats.S1(prev, n) += w;
        stats.S2q(n) += w;
        xi.segment(b.z_cur, dims.n_z) = track.smooth[t].mean;
        xi.segment(b.z_prev, dims.n_z) = track.smooth[t - 1].mean;
        if (dims.n_u > 0) xi.segment(b.u_prev, dims.n_u) = data.u.row(t - 1).transpose();
        const Matrix& lag = track.lag_one[t];  // Cov(z_t, z_{t-1})
        cov.block(b.z_cur, b.z_cur, dims.n_z, dims.n_z) = track.smooth[t].cov;
        cov.block(b.z_prev, b.z_prev, dims.n_z, dims.n_z) = track.smooth[t - 1].cov;
        cov.block(b.z_cur, b.z_prev, dims.n_z, dims.n_z) = lag;
        cov.block(b.z_prev, b.z_cur, dims.n_z, dims.n_z) = lag.transpose();
        cov.block(b.z_cur, b.z_meas, dims.n_z, dims.n_z) = track.smooth[t].cov;
        cov.block(b.z_meas, b.z_cur, dims.n_z, dims.n_z) = track.smooth[t].cov;
        cov.block(b.z_meas, b.z_prev, dims.n_z, dims.n_z) = lag;
        cov.block(b.z_prev, b.z_meas, dims.n_z, dims.n_z) = lag.transpose();
      }
      stats.S3[static_cast<std::size_t>(n)] += w * (xi * xi.transpose() + cov);
    }
  }
  for (auto& m : stats.S3) m = symmetrized(m);
  return stats;
}

SuffStats sa_update(const SuffStats& prev, const SuffStats& cur, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("sa_update: gamma must lie in (0, 1]");
  }
  if (prev.S1.rows() != cur.S1.rows() || prev.S3.size() != cur.S3.size() ||
      (!prev.S3.empty() && prev.S3[0].rows() != cur.S3[0].rows())) {
    throw std::invalid_argument("sa_update: shape mismatch");
  }
  SuffStats out;
  const double keep = 1.0 - gamma;
  out.S1 = keep * prev.S1 + gamma * cur.S1;
  out.S2m = keep * prev.S2m + gamma * cur.S2m;
  out.S2q = keep * prev.S2q + gamma * cur.S2q;
  out.S3.resize(prev.S3.size());
  for (std::size_t n = 0; n < prev.S3.size(); ++n) {
    out.S3[n] = keep * prev.S3[n] + gamma * cur.S3[n];
  }
  return out;
}

MStepResult m_step(const SmoothedStats& stats, const Dims& dims, const JmlsModel& prev,
                   const MStepOptions& options) {
  const Blocks b(dims);
  const double total_T = stats.S2m.sum();
  const double eps_occ = options.occupancy_floor_scale * total_T;

  MStepResult res;
  res.model = prev;
  res.model.dims = dims;

  for (int n = 0; n < dims.K; ++n) {
    const double row_sum = stats.S1.row(n).sum();
    if (row_sum > eps_occ) {
      res.model.Pi.row(n) = stats.S1.row(n) / row_sum;
      res.model.Pi.row(n) /= res.model.Pi.row(n).sum();
    }
  }

  const int n_zu = dims.n_z + dims.n_u;
  for (int n = 0; n < dims.K; ++n) {
    const Matrix& s3 = stats.S3[static_cast<std::size_t>(n)];
    const Matrix phi = s3.block(b.z_cur, b.z_cur, dims.n_z, dims.n_z);
    const Matrix psi = s3.block(b.z_cur, b.z_prev, dims.n_z, n_zu);
    const Matrix sigma = s3.block(b.z_prev, b.z_prev, n_zu, n_zu);
    const Matrix omega = s3.block(b.y, b.y, dims.n_y, dims.n_y);
    const Matrix lambda = s3.block(b.y, b.z_meas, dims.n_y, n_zu);
    const Matrix xi = s3.block(b.z_meas, b.z_meas, n_zu, n_zu);

    const bool starved = stats.S2q(n) < eps_occ || stats.S2m(n) < eps_occ ||
                         !well_conditioned(sigma) || !well_conditioned(xi);
    if (starved) {
      res.starved_modes.push_back(n + 1);
      continue;
    }

    ModeParams& mode = res.model.modes[static_cast<std::size_t>(n)];
    const double q_div = options.single_occupancy ? stats.S2m(n) : stats.S2q(n);

    const Matrix sigma_chol = spd_cholesky(sigma, "regression Gram matrix");
    const Matrix ab = chol_solve(sigma_chol, psi.transpose()).transpose();
    mode.A = ab.leftCols(dims.n_z);
    mode.B = ab.rightCols(dims.n_u);
    mode.Q = psd_project((phi - ab * psi.transpose()) / q_div);

    const Matrix xi_chol = spd_cholesky(xi, "measurement Gram matrix");
    const Matrix cd = chol_solve(xi_chol, lambda.transpose()).transpose();
    mode.C = cd.leftCols(dims.n_z);
    mode.D = cd.rightCols(dims.n_u);
    mode.R = psd_project((omega - cd * lambda.transpose()) / stats.S2m(n));
  }
  return res;
}

double q_hat_value(const SmoothedStats& stats, const JmlsModel& theta,
                   const MStepOptions& options) {
  const Dims& dims = theta.dims;
  const Blocks b(dims);
  double value = 0.0;

  for (int n = 0; n < dims.K; ++n) {
    for (int m = 0; m < dims.K; ++m) {
      const double s = stats.S1(n, m);
      if (s == 0.0) continue;
      const double pi = theta.Pi(n, m);
      if (pi <= 0.0) return -std::numeric_limits<double>::infinity();
      value += s * std::log(pi);
    }
  }

  const int n_zu = dims.n_z + dims.n_u;
  for (int n = 1; n <= dims.K; ++n) {
    const ModeParams& mode = theta.mode(n);
    const Matrix& s3 = stats.S3[static_cast<std::size_t>(n - 1)];
    const double s2q = options.single_occupancy ? stats.S2m(n - 1) : stats.S2q(n - 1);
    const double s2m = stats.S2m(n - 1);

    const Matrix q_chol = spd_cholesky(mode.Q, "Q in q_hat_value");
    const Matrix r_chol = spd_cholesky(mode.R, "R in q_hat_value");
    const double logdet_q = 2.0 * q_chol.diagonal().array().log().sum();
    const double logdet_r = 2.0 * r_chol.diagonal().array().log().sum();

    // Residual quadratic forms: G_q = [I -A -B] on [z_t | z_{t-1}, u_{t-1}],
    // G_r = [I -C -D] on [y_t | z_t, u_t].
    Matrix gq(dims.n_z, dims.n_z + n_zu);
    gq << Matrix::Identity(dims.n_z, dims.n_z), -mode.A, -mode.B;
    Matrix gr(dims.n_y, dims.n_y + n_zu);
    gr << Matrix::Identity(dims.n_y, dims.n_y), -mode.C, -mode.D;

    const Matrix s3_tr = s3.block(b.z_cur, b.z_cur, dims.n_z + n_zu, dims.n_z + n_zu);
    const Matrix s3_me = s3.block(b.y, b.y, dims.n_y + n_zu, dims.n_y + n_zu);
    const double tr_q = chol_solve(q_chol, gq * s3_tr * gq.transpose()).trace();
    const double tr_r = chol_solve(r_chol, gr * s3_me * gr.transpose()).trace();

    value -= 0.5 * (s2q * logdet_q + s2m * logdet_r + tr_q + tr_r);
  }
  return value;
}

PsaemRun rb_psaem_continue(PsaemState state, const Dataset& data, int N, int n_iters,
                           const StepSchedule& schedule, Rng& rng,
                           const PsaemCallback& callback, const PsaemOptions& options) {
  {
    auto violations = validate_model(state.theta);
    if (!violations.empty()) {
      throw std::invalid_argument("rb_psaem: invalid model: " + violations.front());
    }
  }
  PsaemRun run;
  std::deque<JmlsModel> tail;
  int consecutive_starved = 0;

  const int last = state.iteration + n_iters;
  while (state.iteration < last) {
    const int k = state.iteration + 1;
    const double gamma = schedule.gamma(k);

    KernelOutput kernel_out = rb_cpf_as(state.theta, data, state.reference, N, rng,
                                        options.kernel);
    const SuffStats suff = compute_suffstats(kernel_out, data, state.theta.dims);
    state.stats = sa_update(state.stats, suff, gamma);
    MStepResult m = m_step(state.stats, state.theta.dims, state.theta, options.m_step);
    {
      auto violations = validate_model(m.model);
      if (!violations.empty()) {
        throw NumericalError("rb_psaem: iterate " + std::to_string(k) +
                             " invalid: " + violations.front());
      }
    }
    state.theta = std::move(m.model);
    state.reference = kernel_out.new_reference;
    state.iteration = k;

    consecutive_starved = m.starved_modes.empty() ? 0 : consecutive_starved + 1;
    if (consecutive_starved > 50) {
      throw NumericalError("rb_psaem: mode starvation persisted for more than 50 iterations"
                           " (iteration " + std::to_string(k) + ")");
    }

    if (options.history_tail > 0) {
      tail.push_back(state.theta);
      if (static_cast<int>(tail.size()) > options.history_tail) tail.pop_front();
    }
    if (callback) {
      PsaemDiagnostics diag;
      diag.k = k;
      diag.gamma = gamma;
      diag.starved_modes = m.starved_modes;
      diag.kernel = &kernel_out;
      callback(state, diag);
    }
  }
  run.history.assign(tail.begin(), tail.end());
  run.state = std::move(state);
  return run;
}

PsaemRun rb_psaem(const JmlsModel& model0, const Dataset& data, int N, int n_iters,
                  const StepSchedule& schedule, Rng& rng, const PsaemCallback& callback,
                  const PsaemOptions& options) {
  PsaemState state;
  state.theta = model0;
  state.stats = SuffStats::zeros(model0.dims);
  state.iteration = 0;
  state.reference.resize(static_cast<std::size_t>(data.T()));
  for (auto& s : state.reference) s = rng.categorical(model0.p_s1) + 1;
  return rb_psaem_continue(std::move(state), data, N, n_iters, schedule, rng, callback,
                           options);
}

}  // namespace jmls
