#pragma once

// Counter-based random numbers (SplitMix64 in counter mode).
//
// Every draw is a pure function of (seed, stream, counter), so any slice of a
// generated object can be reproduced without replaying a generator state:
//
//   out(seed, stream, ctr) = finalize(h0(seed, stream) + ctr * GOLDEN)
//
// with the SplitMix64 finalizer.  Streams separate independent consumers
// (path coordinates, perturbation fields, samplers) under one user seed.

#include <cmath>
#include <cstdint>

namespace fqv::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream key; hoist out of hot loops.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ (stream + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t bits(std::uint64_t key, std::uint64_t counter) {
  return mix64(key + counter * kGolden);
}

// Uniform on the open interval (0,1); never returns an exact endpoint.
inline double u01(std::uint64_t key, std::uint64_t counter) {
  return (static_cast<double>(bits(key, counter) >> 11) + 0.5) * 0x1p-53;
}

// Standard normal via Box-Muller on the counter pair (2k, 2k+1).
inline double gauss(std::uint64_t key, std::uint64_t k) {
  const double u1 = u01(key, 2 * k);
  const double u2 = u01(key, 2 * k + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Uniform on [-1,1].
inline double symmetric(std::uint64_t key, std::uint64_t counter) {
  return 2.0 * u01(key, counter) - 1.0;
}

// Uniform integer in [0, n).
inline std::uint64_t below(std::uint64_t key, std::uint64_t counter, std::uint64_t n) {
  return bits(key, counter) % n;
}

}  // namespace fqv::rng
