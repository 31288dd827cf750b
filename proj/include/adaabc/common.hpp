#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaabc {

// Error taxonomy. The CLI maps ConfigError to exit code 2 and
// NumericError to exit code 3; everything else is a generic failure.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Probabilities are clamped into [kProbClamp, 1-kProbClamp] before any log.
constexpr double kProbClamp = 1e-12;

inline double clamp_prob(double p) {
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

// Derives an independent 64-bit seed for a named sub-stream (splitmix64).
// Every random consumer draws from its own derived stream, so adding one
// consumer never perturbs another.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Stream tags. Network layers use streams [0, kMaskBase); the council's head
// i continues the layer numbering of its trunk, so a one-head council
// initializes exactly like the equivalent monolithic network.
namespace seed_stream {
constexpr std::uint64_t kMaskBase = 1ull << 32;    // council subset masks
constexpr std::uint64_t kShuffle = 2ull << 32;     // epoch batch shuffling
constexpr std::uint64_t kBiasedNet = 3ull << 32;   // council / ERM reference
constexpr std::uint64_t kDebiasNet = 4ull << 32;   // debiasing model
constexpr std::uint64_t kSplitTrain = 5ull << 32;  // dataset generation
constexpr std::uint64_t kSplitVal = 6ull << 32;
constexpr std::uint64_t kSplitTest = 7ull << 32;
}  // namespace seed_stream

// Deterministic PRNG. mt19937_64 output is bit-stable across platforms; the
// distributions are hand-rolled because the standard ones are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  double uniform01() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal(double mean, double stddev) {
    // Box-Muller without a cached spare; two draws per variate.
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  std::size_t index(std::size_t n) {  // uniform in [0, n), rejection sampled
    std::uint64_t bound = ~0ull - (~0ull % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= bound);
    return static_cast<std::size_t>(x % n);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  // First k slots of a Fisher-Yates pass: k distinct indices out of [0, n).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
      std::swap(idx[i], idx[i + index(n - i)]);
    }
    idx.resize(k);
    return idx;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace adaabc
