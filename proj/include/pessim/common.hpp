#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace pessim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when a value object is constructed from inconsistent data
/// (row sums off, shapes mismatched, out-of-range parameters).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical routine cannot produce a trustworthy answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SplitMix64 finalizer. Used to derive independent child seeds from a parent
/// seed and a counter, so the seed of cell k never depends on scheduling.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t counter) {
  return splitmix64(parent ^ splitmix64(counter + 0x632BE59BD9B4E019ULL));
}

/// Seeded 64-bit generator with the handful of draws the library needs.
/// Uniform doubles are built from the top 53 bits so sequences are identical
/// across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  /// Standard normal via Box-Muller (one value per call, the pair is not cached).
  double normal();

  /// Draws an index from an unnormalized nonnegative weight vector.
  template <typename Weights>
  std::size_t categorical(const Weights& w) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(w.size()); ++i) total += w[i];
    double u = uniform() * total;
    const auto n = static_cast<std::size_t>(w.size());
    for (std::size_t i = 0; i < n; ++i) {
      u -= w[static_cast<Eigen::Index>(i)];
      if (u < 0.0) return i;
    }
    // Rounding left u marginally nonnegative: return the last positive entry.
    for (std::size_t i = n; i-- > 0;) {
      if (w[static_cast<Eigen::Index>(i)] > 0.0) return i;
    }
    return n - 1;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pessim
