#include "doctest.h"

#include <cmath>

#include "jmls/backward_info.hpp"
#include "jmls/testutil.hpp"

using namespace jmls;

namespace {

// Particles with beliefs generated by genuinely filtering the data under
// random mode prefixes, as the kernel would produce them.
struct ParticleSet {
  std::vector<AncestorWeightInputs> inputs;
  std::vector<std::vector<int>> prefixes;  // mode paths up to t-1
};

ParticleSet make_particles(const JmlsModel& model, const Dataset& data, int t, int count,
                           Rng& rng) {
  ParticleSet set;
  Vector raw(count);
  for (int i = 0; i < count; ++i) {
    std::vector<int> prefix(static_cast<std::size_t>(t - 1));
    for (auto& s : prefix) s = static_cast<int>(rng.u64() % model.dims.K) + 1;
    Dataset head;
    head.u = data.u.topRows(t - 1);
    head.y = data.y.topRows(t - 1);
    KalmanTrack track = filter_fixed_modes(model, prefix, head);
    AncestorWeightInputs in;
    in.filt = track.filt.back();
    in.chol = psd_cholesky(in.filt.cov, "filtered covariance");
    in.mode = prefix.back();
    raw(i) = rng.uniform(0.2, 1.0);
    set.prefixes.push_back(std::move(prefix));
    set.inputs.push_back(std::move(in));
  }
  raw /= raw.sum();
  for (int i = 0; i < count; ++i) {
    set.inputs[static_cast<std::size_t>(i)].log_weight = std::log(raw(i));
  }
  return set;
}

}  // namespace

TEST_CASE("terminal conditions of the backward recursion") {
  Rng rng(71);
  JmlsModel m = testutil::random_model(rng, 2, 2, 2, 1, 6);
  Matrix u = generate_input(6, 1, 0.9, rng);
  auto [data, traj] = simulate(m, u, rng);
  const BackwardInfo info = backward_recursion(m, traj.s, data);

  const int T = 6;
  CHECK(info.Omega[T - 1].cwiseAbs().maxCoeff() == 0.0);
  CHECK(info.lambda[T - 1].cwiseAbs().maxCoeff() == 0.0);

  const ModeParams& mode = m.mode(traj.s[T - 1]);
  const Matrix r_inv = mode.R.inverse();
  const Matrix omega_hat_T = mode.C.transpose() * r_inv * mode.C;
  const Vector resid = data.y.row(T - 1).transpose() - mode.D * data.u.row(T - 1).transpose();
  const Vector lambda_hat_T = mode.C.transpose() * r_inv * resid;
  CHECK((info.OmegaHat[T - 1] - omega_hat_T).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((info.lambdaHat[T - 1] - lambda_hat_T).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("uninformative outputs propagate nothing backward") {
  Rng rng(73);
  JmlsModel m = testutil::random_model(rng, 2, 1, 1, 1, 10);
  for (auto& mode : m.modes) mode.C.setZero();
  Matrix u = generate_input(10, 1, 0.9, rng);
  auto [data, traj] = simulate(m, u, rng);
  const BackwardInfo info = backward_recursion(m, traj.s, data);
  for (int t = 0; t < 10; ++t) {
    CHECK(info.Omega[t].cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(info.lambda[t].cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("Lambda is at least the identity") {
  Rng rng(79);
  JmlsModel m = testutil::random_model(rng, 2, 2, 1, 1, 12);
  Matrix u = generate_input(12, 1, 0.9, rng);
  auto [data, traj] = simulate(m, u, rng);
  const BackwardInfo info = backward_recursion(m, traj.s, data);
  for (int t = 2; t <= 12; ++t) {
    auto set = make_particles(m, data, t, 3, rng);
    for (const auto& p : set.inputs) {
      const Matrix lam = p.chol.transpose() * info.Omega[t - 2] * p.chol +
                         Matrix::Identity(2, 2);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(lam, Eigen::EigenvaluesOnly);
      CHECK(eig.eigenvalues().minCoeff() >= 1.0 - 1e-9);
      CHECK(lam.determinant() >= 1.0 - 1e-9);
    }
  }
}

TEST_CASE("identical particles receive identical ancestor weights") {
  Rng rng(83);
  JmlsModel m = testutil::random_model(rng, 2, 1, 1, 1, 8);
  Matrix u = generate_input(8, 1, 0.9, rng);
  auto [data, traj] = simulate(m, u, rng);
  const BackwardInfo info = backward_recursion(m, traj.s, data);
  auto set = make_particles(m, data, 5, 1, rng);
  std::vector<AncestorWeightInputs> twins = {set.inputs[0], set.inputs[0]};
  const Vector logw = ancestor_logweights(info, 5, twins, m.Pi, traj.s[4]);
  CHECK(logw(0) == logw(1));
}

TEST_CASE("with zero backward information the weights reduce to w * pi") {
  Rng rng(89);
  JmlsModel m = testutil::random_model(rng, 2, 2, 1, 1, 9);
  Matrix u = generate_input(9, 1, 0.9, rng);
  auto [data, traj] = simulate(m, u, rng);
  const BackwardInfo zeros = BackwardInfo::zeros(9, 2);
  for (int t : {2, 5, 9}) {
    auto set = make_particles(m, data, t, 4, rng);
    const Vector logw = ancestor_logweights(zeros, t, set.inputs, m.Pi,
                                            traj.s[static_cast<std::size_t>(t - 1)]);
    for (int i = 0; i < 4; ++i) {
      const auto& p = set.inputs[static_cast<std::size_t>(i)];
      const double expected =
          p.log_weight +
          std::log(m.Pi(p.mode - 1, traj.s[static_cast<std::size_t>(t - 1)] - 1));
      CHECK(logw(i) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

// The definitive correctness property: pairwise ancestor-weight ratios from
// the backward recursion agree with the exact forward-filter evaluation of
// p(y_{t:T}, s'_{t:T} | history).
TEST_CASE("ancestor-weight ratios match the forward-filter oracle") {
  Rng rng(97);
  for (int rep = 0; rep < 20; ++rep) {
    const int n_z = 1 + static_cast<int>(rng.u64() % 2);
    const int T = 5 + static_cast<int>(rng.u64() % 26);
    JmlsModel m = testutil::random_model(rng, 2, n_z, 1, 1, T);
    Matrix u = generate_input(T, 1, 0.9, rng);
    auto [data, traj] = simulate(m, u, rng);

    // A reference trajectory unrelated to the data-generating path.
    std::vector<int> s_prime(static_cast<std::size_t>(T));
    for (auto& s : s_prime) s = static_cast<int>(rng.u64() % 2) + 1;
    const BackwardInfo info = backward_recursion(m, s_prime, data);

    for (int t : {2, T / 2 + 1, T}) {
      auto set = make_particles(m, data, t, 4, rng);
      const Vector logw = ancestor_logweights(info, t, set.inputs, m.Pi,
                                              s_prime[static_cast<std::size_t>(t - 1)]);
      const std::vector<int> future(s_prime.begin() + (t - 1), s_prime.end());
      Vector oracle(4);
      for (int i = 0; i < 4; ++i) {
        const auto& p = set.inputs[static_cast<std::size_t>(i)];
        oracle(i) = testutil::ancestor_weight_oracle(m, p.filt, p.mode, future, data, t);
      }
      for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
          const double lhs = (logw(i) - set.inputs[static_cast<std::size_t>(i)].log_weight) -
                             (logw(j) - set.inputs[static_cast<std::size_t>(j)].log_weight);
          const double rhs = oracle(i) - oracle(j);
          CHECK(std::abs(lhs - rhs) <= 1e-6 * std::max(1.0, std::abs(rhs)));
        }
      }
    }
  }
}

TEST_CASE("oracle cross-check: full-sequence value equals the joint log-likelihood") {
  Rng rng(101);
  JmlsModel m = testutil::random_model(rng, 2, 2, 1, 1, 12);
  Matrix u = generate_input(12, 1, 0.9, rng);
  auto [data, traj] = simulate(m, u, rng);
  const double oracle = testutil::ancestor_weight_oracle(
      m, GaussianBelief{m.mu1, m.P1}, 0, traj.s, data, 1);
  double expected = std::log(m.p_s1(traj.s[0] - 1));
  for (int t = 1; t < 12; ++t) {
    expected += std::log(m.Pi(traj.s[static_cast<std::size_t>(t - 1)] - 1,
                              traj.s[static_cast<std::size_t>(t)] - 1));
  }
  expected += filter_fixed_modes(m, traj.s, data).total_loglik();
  CHECK(oracle == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("oracle single-step case at t = T") {
  Rng rng(103);
  JmlsModel m = testutil::random_model(rng, 2, 1, 1, 1, 7);
  Matrix u = generate_input(7, 1, 0.9, rng);
  auto [data, traj] = simulate(m, u, rng);
  auto set = make_particles(m, data, 7, 1, rng);
  const auto& p = set.inputs[0];
  const int ref_mode = traj.s[6];
  const double oracle =
      testutil::ancestor_weight_oracle(m, p.filt, p.mode, {ref_mode}, data, 7);
  const ModeParams& mode = m.mode(ref_mode);
  const GaussianBelief pred = kf_predict(p.filt, mode, data.u.row(5).transpose());
  const double expected = std::log(m.Pi(p.mode - 1, ref_mode - 1)) +
                          predictive_loglik(pred, mode, data.u.row(6).transpose(),
                                            data.y.row(6).transpose());
  CHECK(oracle == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("likelihood decreases monotonically with data inconsistency") {
  // Near-deterministic model: the further the final output sits from the
  // only consistent value, the smaller the oracle density.
  Dims dims;
  dims.n_z = dims.n_y = dims.K = 1;
  dims.n_u = 0;
  dims.T = 3;
  JmlsModel m = JmlsModel::with_defaults(dims);
  m.modes[0].A = Matrix::Constant(1, 1, 0.5);
  m.modes[0].B = Matrix::Zero(1, 0);
  m.modes[0].C = Matrix::Constant(1, 1, 1.0);
  m.modes[0].D = Matrix::Zero(1, 0);
  m.modes[0].Q = Matrix::Constant(1, 1, 1e-9);
  m.modes[0].R = Matrix::Constant(1, 1, 1e-9);
  m.Pi = Matrix::Constant(1, 1, 1.0);
  m.P1 = Matrix::Constant(1, 1, 1e-9);

  Dataset data;
  data.u = Matrix::Zero(3, 0);
  data.y = Matrix::Zero(3, 1);
  const GaussianBelief belief{Vector::Zero(1), Matrix::Constant(1, 1, 1e-9)};
  double prev = testutil::ancestor_weight_oracle(m, belief, 1, {1}, data, 3);
  CHECK(std::isfinite(prev));
  for (double off : {0.1, 0.5, 2.0}) {
    Dataset bad = data;
    bad.y(2, 0) = off;
    const double lw = testutil::ancestor_weight_oracle(m, belief, 1, {1}, bad, 3);
    CHECK(lw < prev);
    prev = lw;
  }
}
