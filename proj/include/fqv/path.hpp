#pragma once

// Sampled paths on a uniform grid over [0, T].
//
// A path holds M+1 samples of a d-dimensional trajectory at t_k = k*T/M.
// Generators are deterministic in (kind, parameters, seed); the draws come
// from the counter-based generator in rng.hpp, so the same call reproduces
// the same bytes on any run.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fqv {

class SampledPath {
 public:
  SampledPath() = default;
  SampledPath(int dim, double horizon, std::size_t grid, std::string label = {},
              std::optional<std::uint64_t> seed = std::nullopt);

  int dim() const { return dim_; }
  double horizon() const { return horizon_; }
  // Number of grid intervals M; the path stores M+1 sample rows.
  std::size_t grid() const { return grid_; }
  std::size_t points() const { return grid_ + 1; }
  double dt() const { return horizon_ / static_cast<double>(grid_); }
  double time(std::size_t k) const { return horizon_ * static_cast<double>(k) / static_cast<double>(grid_); }

  double value(std::size_t k, int coord) const { return values_[k * dim_ + coord]; }
  double& value(std::size_t k, int coord) { return values_[k * dim_ + coord]; }
  const double* row(std::size_t k) const { return values_.data() + k * dim_; }
  std::span<const double> data() const { return values_; }
  std::span<double> mutable_data() { return values_; }

  const std::string& label() const { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }
  std::optional<std::uint64_t> seed() const { return seed_; }

  // Nearest grid index for a time in [0, T]; exact midpoints round down.
  std::size_t snap(double t) const;

  // Euclidean norm of row k minus row j.
  double row_distance(std::size_t k, std::size_t j) const;

  // Throws ParameterError if a stored value is not finite.
  void check_finite() const;

 private:
  int dim_ = 0;
  double horizon_ = 0.0;
  std::size_t grid_ = 0;
  std::vector<double> values_;
  std::string label_;
  std::optional<std::uint64_t> seed_;
};

// ---- generators -----------------------------------------------------------

// Brownian path: iid N(0, T/M) increments per coordinate, started at 0.
// `correlation` (optional, d x d row-major) couples coordinates through its
// Cholesky factor; identity when absent.
SampledPath generate_brownian(int dim, double horizon, std::size_t grid, std::uint64_t seed,
                              const std::vector<double>* correlation = nullptr);

// Fractional Brownian path by exact circulant embedding of the increment
// covariance, per coordinate.  M must be a power of two.  If the embedding
// is not nonnegative definite the negative eigenvalues are clipped and the
// label gains a "[psd-clipped]" marker.
SampledPath generate_fbm(int dim, double hurst, double horizon, std::size_t grid, std::uint64_t seed);

SampledPath generate_constant(int dim, double horizon, std::size_t grid, double level);

// Smooth paths: each coordinate is a finite sum of power/sine/cosine terms.
struct SmoothTerm {
  enum class Shape { power, sine, cosine };
  Shape shape = Shape::power;
  double amplitude = 1.0;
  // power: amplitude * t^degree ; sine/cosine: amplitude * sin/cos(2*pi*frequency*t)
  double degree = 1.0;
  double frequency = 1.0;
};
struct SmoothSpec {
  // One term list per coordinate; a single list is broadcast to all.
  std::vector<std::vector<SmoothTerm>> per_coord;
};
SampledPath generate_smooth(int dim, double horizon, std::size_t grid, const SmoothSpec& spec);

// Builds a path from explicit increments (row-major, M rows of d), started
// at 0.  This is the generator core behind generate_brownian; tests also use
// it to force degenerate draws.
SampledPath path_from_increments(int dim, double horizon, std::span<const double> increments,
                                 std::string label = {}, std::optional<std::uint64_t> seed = std::nullopt);

// ---- operations -----------------------------------------------------------

// Path frozen after time t (snapped to the grid, midpoints rounding down):
// values before the snap are kept, later rows repeat the snapped row.
SampledPath stop_path(const SampledPath& path, double t);

// ---- pathwise regularity --------------------------------------------------

struct HolderEstimate {
  double exponent = 0.0;
  double norm_estimate = 0.0;
  std::vector<double> scales_used;  // strictly decreasing
  double r_squared = 0.0;
};

// Least-squares slope of log(max increment over the path at scale s) against
// log s over dyadic scales T*2^-j inside [scale_min, scale_max]; at least
// four scales are required.  Pass zeros to use the widest sensible default
// range.  A path with no movement reports exponent 1.0 and norm 0 by
// convention.
HolderEstimate holder_estimate(const SampledPath& path, double scale_min = 0.0, double scale_max = 0.0);

}  // namespace fqv
