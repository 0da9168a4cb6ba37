#include "fqv/path.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "detail/fft.hpp"
#include "fqv/errors.hpp"
#include "fqv/numerics.hpp"
#include "fqv/rng.hpp"

namespace fqv {
namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw ParameterError(msg);
}

bool is_pow2(std::size_t m) { return m != 0 && (m & (m - 1)) == 0; }

}  // namespace

SampledPath::SampledPath(int dim, double horizon, std::size_t grid, std::string label,
                         std::optional<std::uint64_t> seed)
    : dim_(dim), horizon_(horizon), grid_(grid), label_(std::move(label)), seed_(seed) {
  require(dim >= 1, "path dimension must be >= 1");
  require(horizon > 0.0 && std::isfinite(horizon), "horizon must be positive and finite");
  require(grid >= 2, "grid must have at least 2 intervals");
  values_.assign((grid_ + 1) * static_cast<std::size_t>(dim_), 0.0);
}

std::size_t SampledPath::snap(double t) const {
  require(std::isfinite(t) && t >= 0.0 && t <= horizon_, "time outside [0, horizon]");
  const double u = t / horizon_ * static_cast<double>(grid_);
  // round half down: ceil(u - 1/2)
  double k = std::ceil(u - 0.5);
  if (k < 0.0) k = 0.0;
  if (k > static_cast<double>(grid_)) k = static_cast<double>(grid_);
  return static_cast<std::size_t>(k);
}

double SampledPath::row_distance(std::size_t k, std::size_t j) const {
  double s = 0.0;
  const double* a = row(k);
  const double* b = row(j);
  for (int c = 0; c < dim_; ++c) {
    const double d = a[c] - b[c];
    s += d * d;
  }
  return std::sqrt(s);
}

void SampledPath::check_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) throw ParameterError("path contains a non-finite value");
}

SampledPath path_from_increments(int dim, double horizon, std::span<const double> increments,
                                 std::string label, std::optional<std::uint64_t> seed) {
  require(dim >= 1, "path dimension must be >= 1");
  require(increments.size() % static_cast<std::size_t>(dim) == 0, "increment count not divisible by dim");
  const std::size_t grid = increments.size() / static_cast<std::size_t>(dim);
  SampledPath path(dim, horizon, grid, std::move(label), seed);
  auto data = path.mutable_data();
  for (std::size_t k = 0; k < grid; ++k)
    for (int c = 0; c < dim; ++c)
      data[(k + 1) * dim + c] = data[k * dim + c] + increments[k * dim + c];
  path.check_finite();
  return path;
}

SampledPath generate_brownian(int dim, double horizon, std::size_t grid, std::uint64_t seed,
                              const std::vector<double>* correlation) {
  require(dim >= 1, "path dimension must be >= 1");
  require(grid >= 2, "grid must have at least 2 intervals");
  require(horizon > 0.0 && std::isfinite(horizon), "horizon must be positive and finite");
  std::vector<double> chol;
  if (correlation != nullptr) chol = cholesky_lower(*correlation, dim);

  const double step = std::sqrt(horizon / static_cast<double>(grid));
  std::vector<double> inc(grid * static_cast<std::size_t>(dim));
  std::vector<std::uint64_t> keys(dim);
  for (int c = 0; c < dim; ++c) keys[c] = rng::stream_key(seed, static_cast<std::uint64_t>(c));
  std::vector<double> z(dim);
  for (std::size_t k = 0; k < grid; ++k) {
    for (int c = 0; c < dim; ++c) z[c] = rng::gauss(keys[c], k);
    if (!chol.empty()) {
      for (int c = dim - 1; c >= 0; --c) {
        double s = 0.0;
        for (int j = 0; j <= c; ++j) s += chol[static_cast<std::size_t>(c) * dim + j] * z[j];
        z[c] = s;
      }
    }
    for (int c = 0; c < dim; ++c) inc[k * dim + c] = step * z[c];
  }
  return path_from_increments(dim, horizon, inc, "brownian(seed=" + std::to_string(seed) + ")", seed);
}

namespace {

// Increment sequence of fractional Gaussian noise with Var = dt^{2H} per
// step, via the circulant embedding of the autocovariance.  Returns true if
// eigenvalue clipping was needed.
bool fgn_circulant(std::size_t m, double hurst, double dt, std::uint64_t key, std::vector<double>& out) {
  const std::size_t g = 2 * m;
  const double var = std::pow(dt, 2.0 * hurst);
  auto gamma = [&](std::size_t lag) {
    const double k = static_cast<double>(lag);
    return 0.5 * var *
           (std::pow(k + 1.0, 2.0 * hurst) - 2.0 * std::pow(k, 2.0 * hurst) +
            std::pow(std::abs(k - 1.0), 2.0 * hurst));
  };
  std::vector<std::complex<double>> c(g);
  for (std::size_t k = 0; k <= m; ++k) c[k] = gamma(k);
  for (std::size_t k = 1; k < m; ++k) c[g - k] = c[k];
  detail::fft_radix2(c, false);

  bool clipped = false;
  std::vector<double> lambda(g);
  for (std::size_t k = 0; k < g; ++k) {
    double ev = c[k].real();
    if (ev < 0.0) {
      if (ev < -1e-9 * var) clipped = true;
      ev = 0.0;
    }
    lambda[k] = ev;
  }

  // Spectral synthesis: V conjugate-symmetric with E|V_k|^2 = lambda_k.
  std::vector<std::complex<double>> v(g);
  v[0] = std::sqrt(lambda[0]) * rng::gauss(key, 0);
  v[m] = std::sqrt(lambda[m]) * rng::gauss(key, 1);
  for (std::size_t k = 1; k < m; ++k) {
    const double a = rng::gauss(key, 2 * k);
    const double b = rng::gauss(key, 2 * k + 1);
    const double amp = std::sqrt(0.5 * lambda[k]);
    v[k] = std::complex<double>(amp * a, amp * b);
    v[g - k] = std::conj(v[k]);
  }
  detail::fft_radix2(v, false);
  const double scale = 1.0 / std::sqrt(static_cast<double>(g));
  out.resize(m);
  for (std::size_t k = 0; k < m; ++k) out[k] = scale * v[k].real();
  return clipped;
}

}  // namespace

SampledPath generate_fbm(int dim, double hurst, double horizon, std::size_t grid, std::uint64_t seed) {
  require(dim >= 1, "path dimension must be >= 1");
  require(hurst > 0.0 && hurst < 1.0, "hurst exponent must lie in (0,1)");
  require(horizon > 0.0 && std::isfinite(horizon), "horizon must be positive and finite");
  require(is_pow2(grid), "fbm grid must be a power of two");
  require(grid >= 2, "grid must have at least 2 intervals");

  const double dt = horizon / static_cast<double>(grid);
  std::vector<double> inc(grid * static_cast<std::size_t>(dim));
  std::vector<double> coord;
  bool clipped = false;
  for (int c = 0; c < dim; ++c) {
    const std::uint64_t key = rng::stream_key(seed, static_cast<std::uint64_t>(c));
    clipped = fgn_circulant(grid, hurst, dt, key, coord) || clipped;
    for (std::size_t k = 0; k < grid; ++k) inc[k * dim + c] = coord[k];
  }
  std::string label = "fbm(H=" + std::to_string(hurst) + ",seed=" + std::to_string(seed) + ")";
  if (clipped) label += " [psd-clipped]";
  return path_from_increments(dim, horizon, inc, std::move(label), seed);
}

SampledPath generate_constant(int dim, double horizon, std::size_t grid, double level) {
  require(std::isfinite(level), "constant level must be finite");
  SampledPath path(dim, horizon, grid, "constant(" + std::to_string(level) + ")");
  auto data = path.mutable_data();
  std::fill(data.begin(), data.end(), level);
  return path;
}

SampledPath generate_smooth(int dim, double horizon, std::size_t grid, const SmoothSpec& spec) {
  require(dim >= 1, "path dimension must be >= 1");
  require(!spec.per_coord.empty(), "smooth spec needs at least one term list");
  require(spec.per_coord.size() == 1 || spec.per_coord.size() == static_cast<std::size_t>(dim),
          "smooth spec must give one term list or one per coordinate");
  SampledPath path(dim, horizon, grid, "smooth");
  auto data = path.mutable_data();
  const double two_pi = 6.283185307179586476925286766559;
  for (std::size_t k = 0; k <= grid; ++k) {
    const double t = path.time(k);
    for (int c = 0; c < dim; ++c) {
      const auto& terms = spec.per_coord.size() == 1 ? spec.per_coord[0] : spec.per_coord[c];
      double v = 0.0;
      for (const SmoothTerm& term : terms) {
        switch (term.shape) {
          case SmoothTerm::Shape::power:
            v += term.amplitude * std::pow(t, term.degree);
            break;
          case SmoothTerm::Shape::sine:
            v += term.amplitude * std::sin(two_pi * term.frequency * t);
            break;
          case SmoothTerm::Shape::cosine:
            v += term.amplitude * std::cos(two_pi * term.frequency * t);
            break;
        }
      }
      data[k * dim + c] = v;
    }
  }
  path.check_finite();
  return path;
}

SampledPath stop_path(const SampledPath& path, double t) {
  const std::size_t cut = path.snap(t);
  SampledPath stopped = path;
  auto data = stopped.mutable_data();
  const int d = path.dim();
  for (std::size_t k = cut + 1; k <= path.grid(); ++k)
    for (int c = 0; c < d; ++c) data[k * d + c] = data[cut * d + c];
  stopped.set_label(path.label().empty() ? "stopped" : path.label() + " stopped");
  return stopped;
}

HolderEstimate holder_estimate(const SampledPath& path, double scale_min, double scale_max) {
  const double T = path.horizon();
  const std::size_t M = path.grid();
  if (scale_min <= 0.0) scale_min = 4.0 * T / static_cast<double>(M);
  if (scale_max <= 0.0) scale_max = T / 8.0;
  require(scale_min < scale_max, "holder_estimate: empty scale range");

  // Dyadic scales T*2^-j, largest first.
  std::vector<std::size_t> steps;
  std::vector<double> scales;
  for (int j = 1; j < 63; ++j) {
    const double s = T * std::ldexp(1.0, -j);
    if (s > scale_max) continue;
    if (s < scale_min) break;
    const std::size_t m = M >> j;
    if (m == 0 || (M % (std::size_t{1} << j)) != 0) break;
    steps.push_back(m);
    scales.push_back(s);
  }
  if (steps.size() < 4) throw ParameterError("holder_estimate: fewer than 4 dyadic scales in range");

  std::vector<double> max_inc(steps.size(), 0.0);
  for (std::size_t si = 0; si < steps.size(); ++si) {
    const std::size_t m = steps[si];
    double best = 0.0;
    for (std::size_t k = 0; k + m <= M; ++k) best = std::max(best, path.row_distance(k + m, k));
    max_inc[si] = best;
  }

  HolderEstimate est;
  est.scales_used = scales;
  const double moved = *std::max_element(max_inc.begin(), max_inc.end());
  if (moved < 1e-14) {
    // No movement at any scale: report the smoothest admissible exponent.
    est.exponent = 1.0;
    est.norm_estimate = 0.0;
    est.r_squared = 1.0;
    return est;
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (max_inc[i] <= 0.0) continue;
    lx.push_back(std::log(scales[i]));
    ly.push_back(std::log(max_inc[i]));
  }
  if (lx.size() < 4) throw ParameterError("holder_estimate: fewer than 4 usable scales (path too flat)");
  const LinearFit fit = linear_fit(lx, ly);
  est.exponent = fit.slope;
  est.r_squared = fit.r_squared;
  double norm = 0.0;
  for (std::size_t i = 0; i < scales.size(); ++i)
    norm = std::max(norm, max_inc[i] / std::pow(scales[i], est.exponent));
  est.norm_estimate = norm;
  return est;
}

}  // namespace fqv
