#pragma once

// Deterministic counter-based random streams. All randomness in the toolkit
// flows through these helpers so that runs replay bit-exactly regardless of
// thread count or platform std::lib (no std::*_distribution anywhere).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace felb::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from (seed, stream-index); used e.g. for per-client
/// and per-round streams.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + kGolden));
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive(derive(seed, a), b);
}

/// Keyed stateless draw: the value at position `counter` of stream `key`.
inline std::uint64_t at(std::uint64_t key, std::uint64_t counter) {
  return splitmix64(key ^ splitmix64(counter));
}

/// Maps to [0, 1).
inline double to_unit(std::uint64_t r) { return static_cast<double>(r >> 11) * 0x1.0p-53; }

/// Maps to (0, 1); both endpoints excluded so log/inverse-CDF transforms stay finite.
inline double to_unit_open(std::uint64_t r) {
  return (static_cast<double>(r >> 12) + 0.5) * 0x1.0p-52;
}

/// Sequential stream over a keyed counter. Copyable; identical copies replay
/// identical sequences.
struct Stream {
  std::uint64_t key = 0;
  std::uint64_t counter = 0;

  explicit Stream(std::uint64_t k) : key(k) {}

  std::uint64_t next_u64() { return at(key, counter++); }
  double unit() { return to_unit(next_u64()); }
  double unit_open() { return to_unit_open(next_u64()); }

  /// Uniform integer in [0, n), n > 0.
  std::uint64_t index(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller; consumes two uniforms per call.
  double normal() {
    const double u1 = unit_open();
    const double u2 = unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Zero-mean Laplace with scale b (inverse CDF).
  double laplace(double b) {
    const double u = unit_open() - 0.5;
    const double s = u < 0.0 ? -1.0 : 1.0;
    return -b * s * std::log(1.0 - 2.0 * std::abs(u));
  }
};

template <typename T>
void shuffle(std::vector<T>& values, Stream& stream) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(stream.index(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace felb::rng
