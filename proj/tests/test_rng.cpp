#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "doctest.h"
#include "fqv/rng.hpp"

using namespace fqv;

// ===========================================================================
// Counter-mode draws: pure functions of (seed, stream, counter)
// ===========================================================================

TEST_CASE("draws are reproducible and order-free") {
  const std::uint64_t key = rng::stream_key(42, 3);
  std::vector<double> forward, backward;
  for (std::uint64_t k = 0; k < 64; ++k) forward.push_back(rng::u01(key, k));
  for (std::uint64_t k = 64; k-- > 0;) backward.push_back(rng::u01(key, k));
  for (std::size_t i = 0; i < 64; ++i) CHECK(forward[i] == backward[63 - i]);
}

TEST_CASE("streams with the same seed do not collide") {
  const std::uint64_t a = rng::stream_key(42, 0);
  const std::uint64_t b = rng::stream_key(42, 1);
  CHECK(a != b);
  int agree = 0;
  for (std::uint64_t k = 0; k < 256; ++k)
    if (rng::bits(a, k) == rng::bits(b, k)) ++agree;
  CHECK(agree == 0);
}

TEST_CASE("u01 stays inside the open interval") {
  const std::uint64_t key = rng::stream_key(7, 0);
  for (std::uint64_t k = 0; k < 4096; ++k) {
    const double u = rng::u01(key, k);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("symmetric covers [-1,1]") {
  const std::uint64_t key = rng::stream_key(7, 1);
  double lo = 1.0, hi = -1.0;
  for (std::uint64_t k = 0; k < 4096; ++k) {
    const double u = rng::symmetric(key, k);
    CHECK(u >= -1.0);
    CHECK(u <= 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < -0.9);
  CHECK(hi > 0.9);
}

TEST_CASE("gauss has standard moments at sampling accuracy") {
  const std::uint64_t key = rng::stream_key(2026, 0);
  const std::size_t n = 1 << 16;
  double sum = 0.0, sumsq = 0.0;
  for (std::uint64_t k = 0; k < n; ++k) {
    const double g = rng::gauss(key, k);
    sum += g;
    sumsq += g * g;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = sumsq / static_cast<double>(n) - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("below lands in range and hits every residue") {
  const std::uint64_t key = rng::stream_key(1, 9);
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 512; ++k) {
    const std::uint64_t v = rng::below(key, k, 7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}
