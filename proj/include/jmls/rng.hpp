#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace jmls {

/// Seeded random source with an explicit, engine-independent draw discipline.
///
/// All distributions are derived from raw 64-bit words of a mt19937_64 so the
/// byte stream of any experiment depends only on the seed and the order of
/// calls, never on standard-library distribution internals. Every normal()
/// consumes exactly two words (Box-Muller, no cached spare).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t u64() { return gen_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes exactly two words.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Eigen::VectorXd normal_vec(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  /// Draw a 0-based index with probability proportional to probs (entries
  /// must be non-negative, not all zero).
  int categorical(const Eigen::VectorXd& probs) {
    const double total = probs.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw std::runtime_error("categorical draw from degenerate weights");
    }
    const double u = uniform() * total;
    double acc = 0.0;
    int last_positive = -1;
    for (int i = 0; i < probs.size(); ++i) {
      if (probs(i) > 0.0) last_positive = i;
      acc += probs(i);
      if (u < acc) return probs(i) > 0.0 ? i : last_positive;
    }
    return last_positive;
  }

  /// Documented stream-splitting rule: child streams for parallel work units
  /// (particles, experiment repeats) are seeded with
  /// splitmix64(seed ^ (0x9E3779B97F4A7C15 * (index + 1))).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL * (index + 1));
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  Rng spawn(std::uint64_t index) { return Rng(derive(u64(), index)); }

  std::string serialize() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  static Rng deserialize(const std::string& state) {
    Rng r(0);
    std::istringstream is(state);
    is >> r.gen_;
    if (!is) throw std::runtime_error("bad rng state string");
    return r;
  }

 private:
  std::mt19937_64 gen_;
};

/// In-place log-domain normalization with max subtraction. Returns
/// log(sum(exp(logw))) relative to the original scale; after the call the
/// entries are linear-domain weights summing to one.
inline double normalize_log_weights(Eigen::VectorXd& logw) {
  const double m = logw.maxCoeff();
  if (!std::isfinite(m)) {
    throw std::runtime_error("all log-weights are non-finite");
  }
  Eigen::VectorXd w = (logw.array() - m).exp();
  const double s = w.sum();
  logw = w / s;
  return m + std::log(s);
}

}  // namespace jmls
