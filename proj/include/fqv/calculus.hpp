#pragma once

// Quadratic variation, pathwise Riemann-sum integrals, the change-of-variable
// residual, the isometry gap, first/second-order remainders with exponent
// fits, the rough-smooth decomposition, and a seeded Monte Carlo check of the
// integral's second-moment identity.
//
// Conventions: all sums against d[omega] and dt are left-endpoint sums at the
// same partition level as the Riemann sums; reductions go through pairwise
// summation so results do not depend on worker count.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fqv/functional.hpp"
#include "fqv/partition.hpp"
#include "fqv/path.hpp"

namespace fqv {

// ---- quadratic variation --------------------------------------------------

// Cumulative sum of outer products delta delta^T at partition times.
// values[0] = 0; increments are PSD by construction; off-diagonals realize
// the polarization identity exactly.
struct StepMatrixFunction {
  int dim = 0;
  std::vector<double> times;   // cells() + 1 entries
  std::vector<double> values;  // times.size() * dim * dim, row-major per time
  const double* at(std::size_t i) const { return values.data() + i * static_cast<std::size_t>(dim) * dim; }
  double entry(std::size_t i, int r, int c) const {
    return values[(i * static_cast<std::size_t>(dim) + r) * dim + c];
  }
  double trace(std::size_t i) const;
  // Total variation at the right end, entry (r, c).
  double total(int r = 0, int c = 0) const;
};

StepMatrixFunction qv_along(const SampledPath& path, const Partition& partition);

struct QvLevel {
  int n = 0;
  StepMatrixFunction qv;
};
std::vector<QvLevel> quadratic_variation(const SampledPath& path, const PartitionSequence& seq);

// ---- pathwise integral ----------------------------------------------------

enum class IntegralVariant {
  along_approx,  // gradient state from the piecewise-constant approximation
  along_path,    // gradient state from the path itself
};
const char* to_string(IntegralVariant variant);

struct IntegralEstimate {
  int level = 0;
  IntegralVariant variant = IntegralVariant::along_path;
  double value = 0.0;
  std::vector<double> partial_sums;  // at partition times when requested, else empty
};

// Sum_i grad F(t_i, .) . (omega(t_{i+1}) - omega(t_i)) over one level.  The
// along_approx variant reads running-integral history from the level's
// piecewise-constant approximation while the state argument at t_i stays the
// path's own value there (the approximation stopped just before t_i).
IntegralEstimate follmer_integral(const Functional& f, const SampledPath& path,
                                  const Partition& partition, int level, IntegralVariant variant,
                                  bool want_partials = false);
std::vector<IntegralEstimate> follmer_integral(const Functional& f, const SampledPath& path,
                                               const PartitionSequence& seq, IntegralVariant variant);

// ---- change of variable ---------------------------------------------------

// | F(T) - F(0) - int DF dt - 1/2 sum <hess, delta delta^T> - riemann sum |
// with every sum at the given level.  Zero to rounding for quadratic F.
double change_of_variable_residual(const Functional& f, const SampledPath& path,
                                   const Partition& partition);

// ---- isometry gap ---------------------------------------------------------

struct IsometryLevel {
  int n = 0;
  double lhs = 0.0;      // sum of squared functional increments
  double rhs = 0.0;      // sum (grad . delta)^2, left points
  double gap = 0.0;      // |lhs - rhs|
  double rel_gap = 0.0;  // gap / max(|lhs|, |rhs|, 1e-300)
  double mesh = 0.0;
  double osc = 0.0;
  double foscill = 0.0;  // largest functional increment on the level
};
std::vector<IsometryLevel> isometry_gap(const Functional& f, const SampledPath& path,
                                        const PartitionSequence& seq);

// ---- remainders and exponent fits -----------------------------------------

struct RemainderSample {
  double t = 0.0;
  double s = 0.0;
  double value = 0.0;  // |R| at (t, s)
  double scale = 0.0;  // s - t
};

// Dyadic scale list T * 2^-j for j in [j_min, j_max].
std::vector<double> dyadic_scales(double horizon, int j_min, int j_max);

// First-order remainder |F(s) - F(t) - grad F(t) . (omega(s) - omega(t))|
// at `count` uniformly drawn left endpoints per scale.
std::vector<RemainderSample> remainder_samples(const Functional& f, const SampledPath& path,
                                               const std::vector<double>& scales, int count,
                                               std::uint64_t seed);

// Second-order residual: additionally subtracts the left-sum time integral of
// DF over [t, s) and 1/2 <hess, delta delta^T>.
std::vector<RemainderSample> expansion_residual_samples(const Functional& f, const SampledPath& path,
                                                        const std::vector<double>& scales, int count,
                                                        std::uint64_t seed);

struct ExponentFit {
  double exponent = 0.0;     // +inf when every scale sits below the floor
  double r_squared = 0.0;
  bool all_below_floor = false;
  int scales_used = 0;
};

// Log-log slope of (max |R| per scale) against scale.  Scales whose max lies
// below 1e-14 are dropped; if none survive the +inf flag is set.
ExponentFit remainder_exponent_fit(const std::vector<RemainderSample>& samples);

// ---- rough-smooth decomposition -------------------------------------------

struct DecompositionLevel {
  int n = 0;
  double qv_transformed = 0.0;  // [F(., base)] at this level
  double qv_smooth = 0.0;       // [defect] at this level
  double qv_ratio = 0.0;        // qv_smooth / qv_transformed (0 when both 0)
};

struct Decomposition {
  std::vector<double> times;   // finest-level partition times
  std::vector<double> phi;     // grad F at the left point, flattened dim per time
  std::vector<double> rough;   // partial Riemann sums of phi against the base path
  std::vector<double> smooth;  // transformed value minus rough part
  std::vector<DecompositionLevel> levels;
  bool degenerate_qv = false;  // some finest-level cell moved by exactly zero
};

// Splits t -> F(t, base) into a Riemann-sum part against `base` and a defect
// whose quadratic variation vanishes with the level.
Decomposition rough_smooth_decompose(const Functional& f, const SampledPath& base,
                                     const PartitionSequence& seq);

// ---- Monte Carlo second-moment check --------------------------------------

struct ItoMcResult {
  double mean_lhs = 0.0;  // mean of (integral over [0, T])^2
  double mean_rhs = 0.0;  // mean of left-sum of |grad F|^2 dt
  double se_lhs = 0.0;
  double se_rhs = 0.0;
  double se_combined = 0.0;  // sqrt(se_lhs^2 + se_rhs^2)
  double se_diff = 0.0;      // paired stderr of lhs - rhs
  int seeds = 0;
};

// Brownian paths with seeds seed0 .. seed0+count-1 at one dyadic level.
// Deterministic for fixed inputs regardless of FQV_THREADS.
ItoMcResult ito_isometry_mc(const Functional& f, int count, std::uint64_t seed0, int level,
                            std::size_t grid, double horizon, int dim = 1);

// Worker cap: min(hardware threads, FQV_THREADS when set).
int worker_count();

}  // namespace fqv
