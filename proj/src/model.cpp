#include "jmls/model.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace jmls {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

bool is_symmetric(const Matrix& m, double tol = 1e-10) {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * (1.0 + m.cwiseAbs().maxCoeff());
}

bool is_psd(const Matrix& m, double tol = 1e-9) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(m), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -tol * (1.0 + m.cwiseAbs().maxCoeff());
}

bool is_pd(const Matrix& m) {
  if (!is_symmetric(m)) return false;
  Eigen::LLT<Matrix> llt(symmetrized(m));
  return llt.info() == Eigen::Success;
}

void check_shape(std::vector<std::string>& out, const Matrix& m, int rows, int cols,
                 const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    out.push_back(name + " has shape " + std::to_string(m.rows()) + "x" +
                  std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                  std::to_string(cols));
  }
}

}  // namespace

JmlsModel JmlsModel::with_defaults(const Dims& dims) {
  JmlsModel m;
  m.dims = dims;
  m.modes.resize(static_cast<std::size_t>(dims.K));
  for (auto& p : m.modes) {
    p.A = Matrix::Zero(dims.n_z, dims.n_z);
    p.B = Matrix::Zero(dims.n_z, dims.n_u);
    p.C = Matrix::Zero(dims.n_y, dims.n_z);
    p.D = Matrix::Zero(dims.n_y, dims.n_u);
    p.Q = Matrix::Zero(dims.n_z, dims.n_z);
    p.R = Matrix::Zero(dims.n_y, dims.n_y);
  }
  m.Pi = Matrix::Constant(dims.K, dims.K, 1.0 / dims.K);
  m.p_s1 = Vector::Constant(dims.K, 1.0 / dims.K);
  m.mu1 = Vector::Zero(dims.n_z);
  m.P1 = Matrix::Identity(dims.n_z, dims.n_z);
  return m;
}

std::vector<std::string> validate_model(const JmlsModel& model, bool require_pd_R) {
  std::vector<std::string> v;
  const Dims& d = model.dims;
  if (d.n_z < 1) v.push_back("n_z must be >= 1");
  if (d.n_y < 1) v.push_back("n_y must be >= 1");
  if (d.n_u < 0) v.push_back("n_u must be >= 0");
  if (d.K < 1) v.push_back("K must be >= 1");
  if (d.T < 1) v.push_back("T must be >= 1");
  if (!v.empty()) return v;  // shapes below assume sane dims

  if (static_cast<int>(model.modes.size()) != d.K) {
    v.push_back("model has " + std::to_string(model.modes.size()) + " modes, expected " +
                std::to_string(d.K));
    return v;
  }

  for (int n = 1; n <= d.K; ++n) {
    const ModeParams& p = model.mode(n);
    const std::string tag = " of mode " + std::to_string(n);
    check_shape(v, p.A, d.n_z, d.n_z, "A" + tag);
    check_shape(v, p.B, d.n_z, d.n_u, "B" + tag);
    check_shape(v, p.C, d.n_y, d.n_z, "C" + tag);
    check_shape(v, p.D, d.n_y, d.n_u, "D" + tag);
    check_shape(v, p.Q, d.n_z, d.n_z, "Q" + tag);
    check_shape(v, p.R, d.n_y, d.n_y, "R" + tag);
    for (const auto* m : {&p.A, &p.B, &p.C, &p.D, &p.Q, &p.R}) {
      if (m->size() > 0 && !m->allFinite()) {
        v.push_back("non-finite entries in parameters" + tag);
        break;
      }
    }
    if (p.Q.rows() == d.n_z && p.Q.cols() == d.n_z) {
      if (!is_symmetric(p.Q)) {
        v.push_back("Q" + tag + " not symmetric");
      } else if (!is_psd(p.Q)) {
        v.push_back("Q" + tag + " not positive semi-definite");
      }
    }
    if (p.R.rows() == d.n_y && p.R.cols() == d.n_y) {
      if (require_pd_R && !is_pd(p.R)) {
        v.push_back("R of mode " + std::to_string(n) + " not positive definite");
      } else if (!require_pd_R) {
        if (!is_symmetric(p.R)) {
          v.push_back("R of mode " + std::to_string(n) + " not symmetric");
        } else if (!is_psd(p.R)) {
          v.push_back("R of mode " + std::to_string(n) + " not positive semi-definite");
        }
      }
    }
  }

  check_shape(v, model.Pi, d.K, d.K, "Pi");
  if (model.Pi.rows() == d.K && model.Pi.cols() == d.K) {
    for (int n = 0; n < d.K; ++n) {
      if (model.Pi.row(n).minCoeff() < 0.0) {
        v.push_back("row " + std::to_string(n + 1) + " of Pi has negative entries");
      }
      const double s = model.Pi.row(n).sum();
      if (std::abs(s - 1.0) > 1e-12) {
        v.push_back("row " + std::to_string(n + 1) + " of Pi sums to " + fmt(s));
      }
    }
  }

  if (model.p_s1.size() != d.K) {
    v.push_back("p_s1 has length " + std::to_string(model.p_s1.size()) + ", expected " +
                std::to_string(d.K));
  } else {
    if (model.p_s1.minCoeff() < 0.0) v.push_back("p_s1 has negative entries");
    const double s = model.p_s1.sum();
    if (std::abs(s - 1.0) > 1e-12) v.push_back("p_s1 sums to " + fmt(s));
  }

  if (model.mu1.size() != d.n_z) {
    v.push_back("mu1 has length " + std::to_string(model.mu1.size()) + ", expected " +
                std::to_string(d.n_z));
  }
  check_shape(v, model.P1, d.n_z, d.n_z, "P1");
  if (model.P1.rows() == d.n_z && model.P1.cols() == d.n_z) {
    if (!is_symmetric(model.P1)) {
      v.push_back("P1 not symmetric");
    } else if (!is_psd(model.P1)) {
      v.push_back("P1 not positive semi-definite");
    }
  }
  return v;
}

std::pair<Dataset, Trajectory> simulate(const JmlsModel& model, const Matrix& u, Rng& rng) {
  const Dims& d = model.dims;
  if (u.rows() != d.T || u.cols() != d.n_u) {
    throw std::invalid_argument("simulate: input is " + std::to_string(u.rows()) + "x" +
                                std::to_string(u.cols()) + ", model expects " +
                                std::to_string(d.T) + "x" + std::to_string(d.n_u));
  }
  {
    auto violations = validate_model(model, /*require_pd_R=*/false);
    if (!violations.empty()) {
      throw std::invalid_argument("simulate: invalid model: " + violations.front());
    }
  }

  // Noise factors per mode, plus the initial-state factor.
  std::vector<Matrix> chol_q(d.K), chol_r(d.K);
  for (int n = 1; n <= d.K; ++n) {
    chol_q[n - 1] = psd_cholesky(model.mode(n).Q, "Q of mode " + std::to_string(n));
    chol_r[n - 1] = psd_cholesky(model.mode(n).R, "R of mode " + std::to_string(n));
  }
  const Matrix chol_p1 = psd_cholesky(model.P1, "P1");

  Trajectory traj;
  traj.s.resize(static_cast<std::size_t>(d.T));
  traj.z.resize(d.T, d.n_z);
  Dataset data;
  data.u = u;
  data.y.resize(d.T, d.n_y);

  // Draw order per step: mode, process noise, measurement noise.
  traj.s[0] = rng.categorical(model.p_s1) + 1;
  Vector z = model.mu1 + chol_p1 * rng.normal_vec(d.n_z);
  traj.z.row(0) = z;
  {
    const ModeParams& p = model.mode(traj.s[0]);
    Vector y = p.C * z + chol_r[traj.s[0] - 1] * rng.normal_vec(d.n_y);
    if (d.n_u > 0) y += p.D * u.row(0).transpose();
    data.y.row(0) = y;
  }

  for (int t = 1; t < d.T; ++t) {
    const int s_next = rng.categorical(model.Pi.row(traj.s[t - 1] - 1).transpose()) + 1;
    traj.s[t] = s_next;
    const ModeParams& p = model.mode(s_next);
    Vector z_next = p.A * z + chol_q[s_next - 1] * rng.normal_vec(d.n_z);
    if (d.n_u > 0) z_next += p.B * u.row(t - 1).transpose();
    z = z_next;
    traj.z.row(t) = z;
    Vector y = p.C * z + chol_r[s_next - 1] * rng.normal_vec(d.n_y);
    if (d.n_u > 0) y += p.D * u.row(t).transpose();
    data.y.row(t) = y;
  }
  return {std::move(data), std::move(traj)};
}

Matrix generate_input(int T, int n_u, double filter_pole, Rng& rng) {
  if (std::abs(filter_pole) >= 1.0) {
    throw std::invalid_argument("generate_input: |filter_pole| must be < 1");
  }
  Matrix u = Matrix::Zero(T, n_u);
  Vector prev = Vector::Zero(n_u);
  for (int t = 0; t < T; ++t) {
    prev = filter_pole * prev + rng.normal_vec(n_u);
    u.row(t) = prev;
  }
  return u;
}

}  // namespace jmls
