#include "doctest.h"

#include <algorithm>
#include <cstdio>

#include "jmls/io.hpp"
#include "jmls/model.hpp"
#include "jmls/testutil.hpp"

using namespace jmls;

namespace {

JmlsModel scalar_model(double a, double b, double c, double d, double q, double r) {
  Dims dims;
  dims.n_z = dims.n_y = dims.K = 1;
  dims.n_u = 1;
  dims.T = 4;
  JmlsModel m = JmlsModel::with_defaults(dims);
  m.modes[0].A(0, 0) = a;
  m.modes[0].B(0, 0) = b;
  m.modes[0].C(0, 0) = c;
  m.modes[0].D(0, 0) = d;
  m.modes[0].Q(0, 0) = q;
  m.modes[0].R(0, 0) = r;
  m.Pi(0, 0) = 1.0;
  m.P1(0, 0) = 0.0;
  return m;
}

bool has_violation(const std::vector<std::string>& v, const std::string& needle) {
  return std::any_of(v.begin(), v.end(),
                     [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("validate_model accepts a minimal valid model") {
  JmlsModel m = scalar_model(0.5, 0.0, 1.0, 0.0, 0.1, 0.1);
  CHECK(validate_model(m).empty());
}

TEST_CASE("validate_model reports Pi row sums") {
  Rng rng(7);
  JmlsModel m = testutil::random_model(rng, 2, 1, 1, 0, 5);
  m.Pi << 0.5, 0.4, 0.5, 0.5;
  auto v = validate_model(m);
  REQUIRE(!v.empty());
  CHECK(has_violation(v, "row 1 of Pi sums to 0.9"));
}

TEST_CASE("validate_model rejects indefinite R") {
  JmlsModel m = scalar_model(0.5, 0.0, 1.0, 0.0, 0.1, -1.0);
  auto v = validate_model(m);
  CHECK(has_violation(v, "R of mode 1 not positive definite"));
}

TEST_CASE("simulate reproduces the noise-free recursion") {
  JmlsModel m = scalar_model(0.5, 1.0, 1.0, 0.0, 0.0, 0.0);
  Matrix u = Matrix::Ones(4, 1);
  Rng rng(1);
  auto [data, traj] = simulate(m, u, rng);
  const double expected[] = {0.0, 1.0, 1.5, 1.75};
  for (int t = 0; t < 4; ++t) {
    CHECK(traj.z(t, 0) == doctest::Approx(expected[t]).epsilon(1e-15));
    CHECK(data.y(t, 0) == doctest::Approx(expected[t]).epsilon(1e-15));
  }
}

TEST_CASE("simulate follows a deterministic mode alternation") {
  Dims dims;
  dims.n_z = dims.n_y = 1;
  dims.n_u = 0;
  dims.K = 2;
  dims.T = 6;
  JmlsModel m = JmlsModel::with_defaults(dims);
  for (auto& mode : m.modes) {
    mode.A(0, 0) = 0.5;
    mode.C(0, 0) = 1.0;
    mode.Q(0, 0) = 0.1;
    mode.R(0, 0) = 0.1;
  }
  m.Pi << 0.0, 1.0, 1.0, 0.0;
  m.p_s1 << 1.0, 0.0;
  Rng rng(3);
  auto [data, traj] = simulate(m, Matrix::Zero(6, 0), rng);
  for (int t = 0; t < 6; ++t) CHECK(traj.s[static_cast<std::size_t>(t)] == (t % 2 == 0 ? 1 : 2));
}

TEST_CASE("simulated transition frequencies approach Pi") {
  Dims dims;
  dims.n_z = dims.n_y = 1;
  dims.n_u = 0;
  dims.K = 2;
  dims.T = 10000;
  JmlsModel m = JmlsModel::with_defaults(dims);
  for (auto& mode : m.modes) {
    mode.A(0, 0) = 0.2;
    mode.C(0, 0) = 1.0;
    mode.Q(0, 0) = 0.1;
    mode.R(0, 0) = 0.1;
  }
  m.Pi << 0.9, 0.1, 0.2, 0.8;
  Rng rng(11);
  auto [data, traj] = simulate(m, Matrix::Zero(dims.T, 0), rng);
  Matrix counts = Matrix::Zero(2, 2);
  for (int t = 1; t < dims.T; ++t) {
    counts(traj.s[static_cast<std::size_t>(t - 1)] - 1,
           traj.s[static_cast<std::size_t>(t)] - 1) += 1.0;
  }
  for (int n = 0; n < 2; ++n) {
    Vector row = counts.row(n).transpose() / counts.row(n).sum();
    for (int k = 0; k < 2; ++k) CHECK(std::abs(row(k) - m.Pi(n, k)) < 0.02);
  }
}

TEST_CASE("simulate is deterministic per seed and rejects bad input shape") {
  JmlsModel m = scalar_model(0.5, 1.0, 1.0, 0.0, 0.2, 0.3);
  m.P1(0, 0) = 1.0;
  Matrix u(4, 1);
  u << 0.3, -0.1, 0.7, 0.0;
  Rng a(42), b(42);
  auto [d1, t1] = simulate(m, u, a);
  auto [d2, t2] = simulate(m, u, b);
  CHECK(d1.y == d2.y);
  CHECK(t1.z == t2.z);
  CHECK(t1.s == t2.s);
  CHECK_THROWS_AS((void)simulate(m, Matrix::Zero(3, 1), a), std::invalid_argument);
}

TEST_CASE("initial mode distribution matches p_s1 (chi-square)") {
  Dims dims;
  dims.n_z = dims.n_y = 1;
  dims.n_u = 0;
  dims.K = 3;
  dims.T = 1;
  JmlsModel m = JmlsModel::with_defaults(dims);
  for (auto& mode : m.modes) {
    mode.A(0, 0) = 0.1;
    mode.C(0, 0) = 1.0;
    mode.Q(0, 0) = 0.1;
    mode.R(0, 0) = 0.1;
  }
  m.p_s1 << 0.5, 0.3, 0.2;
  Rng rng(5);
  std::vector<long> counts(3, 0);
  for (int rep = 0; rep < 20000; ++rep) {
    auto [data, traj] = simulate(m, Matrix::Zero(1, 0), rng);
    ++counts[static_cast<std::size_t>(traj.s[0] - 1)];
  }
  auto test = testutil::chi_square_gof(counts, m.p_s1);
  CHECK(test.pvalue > 0.001);
}

TEST_CASE("randomized stable models stay finite") {
  Rng rng(99);
  for (int rep = 0; rep < 5; ++rep) {
    JmlsModel m = testutil::random_model(rng, 2, 2, 1, 1, 200);
    REQUIRE(validate_model(m).empty());
    Matrix u = generate_input(m.dims.T, m.dims.n_u, 0.9, rng);
    auto [data, traj] = simulate(m, u, rng);
    CHECK(data.y.allFinite());
    CHECK(traj.z.allFinite());
  }
}

TEST_CASE("generate_input: degenerate filter gives white noise moments") {
  Rng rng(17);
  Matrix u = generate_input(50000, 1, 0.0, rng);
  const double mean = u.mean();
  const double var = (u.array() - mean).square().sum() / (u.size() - 1);
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("generate_input reaches the AR(1) stationary variance") {
  Rng rng(23);
  Matrix u = generate_input(100000, 1, 0.9, rng);
  const double mean = u.mean();
  const double var = (u.array() - mean).square().sum() / (u.size() - 1);
  CHECK(var == doctest::Approx(1.0 / (1.0 - 0.81)).epsilon(0.10));
}

TEST_CASE("generate_input is deterministic per seed") {
  Rng a(5), b(5);
  CHECK(generate_input(100, 2, 0.9, a) == generate_input(100, 2, 0.9, b));
}

TEST_CASE("model JSON files round-trip") {
  Rng rng(31);
  JmlsModel m = testutil::random_model(rng, 2, 2, 1, 1, 50);
  const std::string path = "roundtrip_model.json";
  save_model(m, path);
  JmlsModel back = load_model(path);
  CHECK(back.dims.K == m.dims.K);
  CHECK((back.Pi - m.Pi).cwiseAbs().maxCoeff() == 0.0);
  for (int n = 1; n <= m.dims.K; ++n) {
    CHECK((back.mode(n).A - m.mode(n).A).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.mode(n).Q - m.mode(n).Q).cwiseAbs().maxCoeff() == 0.0);
  }
  std::remove(path.c_str());
}

TEST_CASE("dataset CSV round-trips exactly") {
  Rng rng(37);
  JmlsModel m = testutil::random_model(rng, 2, 1, 2, 1, 25);
  Matrix u = generate_input(m.dims.T, 1, 0.9, rng);
  auto [data, traj] = simulate(m, u, rng);
  const std::string path = "roundtrip_data.csv";
  save_dataset(data, path);
  Dataset back = load_dataset(path);
  CHECK(back.u == data.u);
  CHECK(back.y == data.y);
  std::remove(path.c_str());
}
