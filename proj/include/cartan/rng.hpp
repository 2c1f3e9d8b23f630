#pragma once

// Seedable, splittable random source.
//
// Engine: std::mt19937_64 seeded through std::seed_seq from the 32-bit
// halves of (seed, stream). A child stream is derived as
//   stream' = splitmix64(stream ^ splitmix64(index + 1))
// with the same seed, so replica k of a run always sees the same numbers no
// matter how many workers execute the replicas.

#include "cartan/types.hpp"

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace cartan {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    eng_.seed(seq);
  }

  Rng split(std::uint64_t index) const {
    return Rng(seed_, splitmix64(stream_ ^ splitmix64(index + 1)));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  double normal() { return nd_(eng_); }
  double uniform() { return ud_(eng_); }
  // Standard complex Gaussian, E|z|^2 = 1.
  cplx cnormal() {
    constexpr double s = 0.70710678118654752440;
    const double re = nd_(eng_);
    const double im = nd_(eng_);
    return {s * re, s * im};
  }

  std::mt19937_64& engine() { return eng_; }

  // Full generator state, including the cached normal deviate.
  std::string state() const {
    std::ostringstream os;
    os << seed_ << ' ' << stream_ << ' ' << eng_ << ' ' << nd_;
    return os.str();
  }
  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> seed_ >> stream_ >> eng_ >> nd_;
    if (!is) throw DataError("malformed RNG state");
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 eng_;
  std::normal_distribution<double> nd_{0.0, 1.0};
  std::uniform_real_distribution<double> ud_{0.0, 1.0};
};

inline Mat ginibre(int rows, int cols, Rng& rng) {
  Mat z(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) z(i, j) = rng.cnormal();
  return z;
}

inline RMat real_ginibre(int rows, int cols, Rng& rng) {
  RMat z(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) z(i, j) = rng.normal();
  return z;
}

inline Mat ginibre(int n, Rng& rng) { return ginibre(n, n, rng); }
inline RMat real_ginibre(int n, Rng& rng) { return real_ginibre(n, n, rng); }

}  // namespace cartan
