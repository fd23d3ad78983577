#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace relayfl {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

} // namespace detail

/// Deterministic random stream. Streams are derived from a key tuple such as
/// (master seed, trial, purpose, round), so draws for one trial never depend on
/// how many draws another trial made.
class RandomStream {
public:
  explicit RandomStream(std::uint64_t seed) : engine_(detail::splitmix64(seed)) {}

  static RandomStream keyed(std::initializer_list<std::uint64_t> key) {
    std::uint64_t h = 0x6a09e667f3bcc908ULL;
    for (auto k : key) h = detail::splitmix64(h ^ detail::splitmix64(k));
    return RandomStream(h);
  }

  /// Child stream; the parent is advanced by one draw.
  RandomStream split() { return RandomStream(engine_()); }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  /// Circularly-symmetric complex Gaussian with unit variance.
  std::complex<double> complex_normal() {
    constexpr double kHalfStd = 0.70710678118654752440;
    double re = normal(0.0, kHalfStd);
    double im = normal(0.0, kHalfStd);
    return {re, im};
  }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

} // namespace relayfl
