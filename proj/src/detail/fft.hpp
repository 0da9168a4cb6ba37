#pragma once

// Iterative radix-2 complex FFT, power-of-two sizes only.  The circulant
// embedding below only ever needs sizes 2*M with M a power of two, so a
// dependency-free transform is enough.  Forward convention:
//   X_k = sum_j x_j exp(-2*pi*i*j*k/n); inverse flips the sign, no scaling.

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace fqv::detail {

inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n < 2) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 2.0 : -2.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 3.14159265358979323846 / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

}  // namespace fqv::detail
