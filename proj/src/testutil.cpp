#include "jmls/testutil.hpp"

#include <cmath>
#include <stdexcept>

namespace jmls::testutil {

JointGaussianResult joint_gaussian_oracle(const JmlsModel& model, const std::vector<int>& s,
                                          const Dataset& data) {
  const Dims& dims = model.dims;
  const int T = data.T();
  const int nz = dims.n_z, ny = dims.n_y;
  if (static_cast<int>(s.size()) != T) {
    throw std::invalid_argument("joint_gaussian_oracle: mode sequence length mismatch");
  }
  if (T * nz > 400) {
    throw std::invalid_argument("joint_gaussian_oracle: size guard T*n_z <= 400 exceeded");
  }

  Vector mz = Vector::Zero(T * nz);
  Matrix szz = Matrix::Zero(T * nz, T * nz);
  mz.segment(0, nz) = model.mu1;
  szz.block(0, 0, nz, nz) = model.P1;
  for (int t = 1; t < T; ++t) {
    const ModeParams& mode = model.mode(s[static_cast<std::size_t>(t)]);
    Vector mean = mode.A * mz.segment((t - 1) * nz, nz);
    if (dims.n_u > 0) mean += mode.B * data.u.row(t - 1).transpose();
    mz.segment(t * nz, nz) = mean;
    for (int r = 0; r < t; ++r) {
      szz.block(t * nz, r * nz, nz, nz) = mode.A * szz.block((t - 1) * nz, r * nz, nz, nz);
      szz.block(r * nz, t * nz, nz, nz) = szz.block(t * nz, r * nz, nz, nz).transpose();
    }
    szz.block(t * nz, t * nz, nz, nz) =
        mode.A * szz.block((t - 1) * nz, (t - 1) * nz, nz, nz) * mode.A.transpose() + mode.Q;
  }

  Vector my = Vector::Zero(T * ny);
  Matrix syy(T * ny, T * ny);
  Matrix szy(T * nz, T * ny);
  for (int t = 0; t < T; ++t) {
    const ModeParams& mt = model.mode(s[static_cast<std::size_t>(t)]);
    Vector mean = mt.C * mz.segment(t * nz, nz);
    if (dims.n_u > 0) mean += mt.D * data.u.row(t).transpose();
    my.segment(t * ny, ny) = mean;
    for (int r = 0; r < T; ++r) {
      const ModeParams& mr = model.mode(s[static_cast<std::size_t>(r)]);
      syy.block(t * ny, r * ny, ny, ny) =
          mt.C * szz.block(t * nz, r * nz, nz, nz) * mr.C.transpose();
      szy.block(t * nz, r * ny, nz, ny) = szz.block(t * nz, r * nz, nz, nz) * mr.C.transpose();
    }
    syy.block(t * ny, t * ny, ny, ny) += mt.R;
  }
  syy = symmetrized(syy);

  Eigen::Map<const Matrix> y_rows(data.y.data(), data.y.rows(), data.y.cols());
  Vector y_vec(T * ny);
  for (int t = 0; t < T; ++t) y_vec.segment(t * ny, ny) = data.y.row(t).transpose();

  const Matrix syy_chol = spd_cholesky(syy, "joint output covariance");
  const Matrix gain = chol_solve(syy_chol, szy.transpose()).transpose();  // szy * syy^{-1}
  const Vector cond_mean = mz + gain * (y_vec - my);
  const Matrix cond_cov = symmetrized(szz - gain * szy.transpose());

  JointGaussianResult res;
  res.loglik = gaussian_logpdf_chol(y_vec, my, syy_chol);
  res.mean.resize(static_cast<std::size_t>(T));
  res.cov.resize(static_cast<std::size_t>(T));
  res.lag_one.assign(static_cast<std::size_t>(T), Matrix());
  for (int t = 0; t < T; ++t) {
    res.mean[static_cast<std::size_t>(t)] = cond_mean.segment(t * nz, nz);
    res.cov[static_cast<std::size_t>(t)] = cond_cov.block(t * nz, t * nz, nz, nz);
    if (t >= 1) {
      res.lag_one[static_cast<std::size_t>(t)] = cond_cov.block(t * nz, (t - 1) * nz, nz, nz);
    }
  }
  return res;
}

double ancestor_weight_oracle(const JmlsModel& model, const GaussianBelief& filt_prev,
                              int mode_prev, const std::vector<int>& s_future,
                              const Dataset& data, int t) {
  const int T = data.T();
  if (t < 1 || t > T || static_cast<int>(s_future.size()) != T - t + 1) {
    throw std::invalid_argument("ancestor_weight_oracle: bad attachment time or future length");
  }
  double lw = 0.0;
  if (t == 1) {
    lw += std::log(model.p_s1(s_future[0] - 1));
  } else {
    lw += std::log(model.Pi(mode_prev - 1, s_future[0] - 1));
  }
  for (std::size_t i = 0; i + 1 < s_future.size(); ++i) {
    lw += std::log(model.Pi(s_future[i] - 1, s_future[i + 1] - 1));
  }
  if (!std::isfinite(lw)) return lw;

  GaussianBelief belief = filt_prev;
  for (int r = t; r <= T; ++r) {
    const ModeParams& mode = model.mode(s_future[static_cast<std::size_t>(r - t)]);
    const GaussianBelief pred =
        (r == 1) ? GaussianBelief{model.mu1, model.P1}
                 : kf_predict(belief, mode, data.u.row(r - 2).transpose());
    auto upd = kf_update(pred, mode, data.u.row(r - 1).transpose(),
                         data.y.row(r - 1).transpose());
    lw += upd.loglik;
    belief = std::move(upd.posterior);
  }
  return lw;
}

Enumeration enumerate_posterior(const JmlsModel& model, const Dataset& data) {
  const int T = data.T();
  const int K = model.dims.K;
  double total = std::pow(static_cast<double>(K), T);
  if (total > static_cast<double>(1 << 20)) {
    throw std::invalid_argument("enumerate_posterior: K^T too large");
  }
  const int n_seq = static_cast<int>(total);

  Enumeration e;
  e.sequences.reserve(static_cast<std::size_t>(n_seq));
  e.log_post.resize(n_seq);
  for (int idx = 0; idx < n_seq; ++idx) {
    std::vector<int> s(static_cast<std::size_t>(T));
    int rem = idx;
    for (int t = 0; t < T; ++t) {
      s[static_cast<std::size_t>(t)] = rem % K + 1;
      rem /= K;
    }
    double lp = std::log(model.p_s1(s[0] - 1));
    for (int t = 1; t < T; ++t) {
      lp += std::log(model.Pi(s[static_cast<std::size_t>(t - 1)] - 1,
                              s[static_cast<std::size_t>(t)] - 1));
    }
    if (std::isfinite(lp)) lp += filter_fixed_modes(model, s, data).total_loglik();
    e.log_post(idx) = lp;
    e.sequences.push_back(std::move(s));
  }
  const double mx = e.log_post.maxCoeff();
  const double lse = mx + std::log((e.log_post.array() - mx).exp().sum());
  e.log_post.array() -= lse;
  e.post = e.log_post.array().exp();
  return e;
}

namespace {

// Regularized incomplete gamma P(a, x) by series / continued fraction.
double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  // Lentz continued fraction for Q(a, x).
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + a * std::log(x) - gln) * h;
  return 1.0 - q;
}

}  // namespace

double chi_square_pvalue(double stat, int df) {
  if (df < 1) throw std::invalid_argument("chi_square_pvalue: df must be >= 1");
  return 1.0 - gamma_p(0.5 * df, 0.5 * stat);
}

ChiSquareTest chi_square_gof(const std::vector<long>& counts, const Vector& probs,
                             double min_expected) {
  if (static_cast<int>(counts.size()) != probs.size()) {
    throw std::invalid_argument("chi_square_gof: size mismatch");
  }
  long n = 0;
  for (long c : counts) n += c;
  if (n <= 0) throw std::invalid_argument("chi_square_gof: empty sample");

  std::vector<double> expected;
  std::vector<double> observed;
  double pooled_e = 0.0, pooled_o = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    const double e = probs(i) * static_cast<double>(n);
    if (e >= min_expected) {
      expected.push_back(e);
      observed.push_back(static_cast<double>(counts[static_cast<std::size_t>(i)]));
    } else {
      pooled_e += e;
      pooled_o += static_cast<double>(counts[static_cast<std::size_t>(i)]);
    }
  }
  if (pooled_e > 0.0) {
    if (pooled_e >= min_expected || expected.empty()) {
      expected.push_back(pooled_e);
      observed.push_back(pooled_o);
    } else {
      // Fold the small remainder into the smallest retained cell.
      std::size_t j = 0;
      for (std::size_t i = 1; i < expected.size(); ++i) {
        if (expected[i] < expected[j]) j = i;
      }
      expected[j] += pooled_e;
      observed[j] += pooled_o;
    }
  }
  if (expected.size() < 2) {
    throw std::invalid_argument("chi_square_gof: fewer than two cells after pooling");
  }

  ChiSquareTest test;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const double d = observed[i] - expected[i];
    test.stat += d * d / expected[i];
  }
  test.df = static_cast<int>(expected.size()) - 1;
  test.pvalue = chi_square_pvalue(test.stat, test.df);
  return test;
}

JmlsModel direct_em_lgss(const JmlsModel& theta0, const Dataset& data, int n_iters) {
  if (theta0.dims.K != 1) throw std::invalid_argument("direct_em_lgss: K must be 1");
  const int T = data.T();
  const int nz = theta0.dims.n_z, ny = theta0.dims.n_y, nu = theta0.dims.n_u;
  const std::vector<int> ones(static_cast<std::size_t>(T), 1);

  JmlsModel theta = theta0;
  for (int it = 0; it < n_iters; ++it) {
    KalmanTrack track = filter_fixed_modes(theta, ones, data);
    rts_smooth(track, ones, theta);
    lag_one_cross_cov(track, ones, theta);

    auto zu_prev = [&](int t) {
      Vector v(nz + nu);
      v.head(nz) = track.smooth[static_cast<std::size_t>(t - 1)].mean;
      if (nu > 0) v.tail(nu) = data.u.row(t - 1).transpose();
      return v;
    };
    auto zu_cur = [&](int t) {
      Vector v(nz + nu);
      v.head(nz) = track.smooth[static_cast<std::size_t>(t)].mean;
      if (nu > 0) v.tail(nu) = data.u.row(t).transpose();
      return v;
    };

    Matrix phi = Matrix::Zero(nz, nz);
    Matrix psi = Matrix::Zero(nz, nz + nu);
    Matrix sigma = Matrix::Zero(nz + nu, nz + nu);
    for (int t = 1; t < T; ++t) {
      const Vector zc = track.smooth[static_cast<std::size_t>(t)].mean;
      const Vector zp = zu_prev(t);
      phi += zc * zc.transpose() + track.smooth[static_cast<std::size_t>(t)].cov;
      Matrix cross = zc * zp.transpose();
      cross.block(0, 0, nz, nz) += track.lag_one[static_cast<std::size_t>(t)];
      psi += cross;
      Matrix gram = zp * zp.transpose();
      gram.block(0, 0, nz, nz) += track.smooth[static_cast<std::size_t>(t - 1)].cov;
      sigma += gram;
    }
    Matrix omega = Matrix::Zero(ny, ny);
    Matrix lambda = Matrix::Zero(ny, nz + nu);
    Matrix xi = Matrix::Zero(nz + nu, nz + nu);
    for (int t = 0; t < T; ++t) {
      const Vector yt = data.y.row(t).transpose();
      const Vector zc = zu_cur(t);
      omega += yt * yt.transpose();
      lambda += yt * zc.transpose();
      Matrix gram = zc * zc.transpose();
      gram.block(0, 0, nz, nz) += track.smooth[static_cast<std::size_t>(t)].cov;
      xi += gram;
    }

    const Matrix ab = sigma.ldlt().solve(psi.transpose()).transpose();
    const Matrix cd = xi.ldlt().solve(lambda.transpose()).transpose();
    ModeParams& mode = theta.modes[0];
    mode.A = ab.leftCols(nz);
    mode.B = ab.rightCols(nu);
    mode.Q = symmetrized((phi - ab * psi.transpose()) / (T - 1));
    mode.C = cd.leftCols(nz);
    mode.D = cd.rightCols(nu);
    mode.R = symmetrized((omega - cd * lambda.transpose()) / T);
  }
  return theta;
}

JmlsModel random_model(Rng& rng, int K, int n_z, int n_y, int n_u, int T, double radius_cap) {
  Dims dims;
  dims.n_z = n_z;
  dims.n_y = n_y;
  dims.n_u = n_u;
  dims.K = K;
  dims.T = T;
  JmlsModel model = JmlsModel::with_defaults(dims);
  for (auto& mode : model.modes) {
    Matrix a(n_z, n_z);
    for (int i = 0; i < n_z; ++i) {
      for (int j = 0; j < n_z; ++j) a(i, j) = rng.normal();
    }
    const double rho = a.eigenvalues().cwiseAbs().maxCoeff();
    const double target = rng.uniform(0.1, radius_cap);
    mode.A = rho > 1e-12 ? Matrix(a * (target / rho)) : a;
    for (int i = 0; i < n_z; ++i) {
      for (int j = 0; j < n_u; ++j) mode.B(i, j) = rng.uniform(-1.0, 1.0);
    }
    for (int i = 0; i < n_y; ++i) {
      for (int j = 0; j < n_z; ++j) mode.C(i, j) = rng.uniform(-1.0, 1.0);
    }
    for (int i = 0; i < n_y; ++i) {
      for (int j = 0; j < n_u; ++j) mode.D(i, j) = rng.uniform(-1.0, 1.0);
    }
    Matrix g(n_z, n_z);
    for (int i = 0; i < n_z; ++i) {
      for (int j = 0; j < n_z; ++j) g(i, j) = rng.normal();
    }
    mode.Q = symmetrized(g * g.transpose() / n_z + 0.05 * Matrix::Identity(n_z, n_z));
    Matrix h(n_y, n_y);
    for (int i = 0; i < n_y; ++i) {
      for (int j = 0; j < n_y; ++j) h(i, j) = rng.normal();
    }
    mode.R = symmetrized(h * h.transpose() / n_y + 0.1 * Matrix::Identity(n_y, n_y));
  }
  for (int n = 0; n < K; ++n) {
    Vector row(K);
    for (int m = 0; m < K; ++m) row(m) = rng.uniform(0.1, 1.0);
    row(n) += 1.0;  // mildly sticky, all entries positive
    model.Pi.row(n) = row / row.sum();
  }
  return model;
}

}  // namespace jmls::testutil
