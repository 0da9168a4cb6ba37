#include "fqv/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <thread>

#include "fqv/errors.hpp"
#include "fqv/numerics.hpp"
#include "fqv/rng.hpp"

namespace fqv {

// ---- quadratic variation --------------------------------------------------

double StepMatrixFunction::trace(std::size_t i) const {
  double acc = 0.0;
  for (int r = 0; r < dim; ++r) acc += entry(i, r, r);
  return acc;
}

double StepMatrixFunction::total(int r, int c) const {
  if (times.empty()) return 0.0;
  return entry(times.size() - 1, r, c);
}

StepMatrixFunction qv_along(const SampledPath& path, const Partition& partition) {
  const int d = path.dim();
  const std::size_t cells = partition.cells();
  StepMatrixFunction out;
  out.dim = d;
  out.times.resize(cells + 1);
  out.values.assign((cells + 1) * static_cast<std::size_t>(d) * d, 0.0);
  out.times[0] = partition.time(0);
  std::vector<double> delta(d);
  for (std::size_t i = 0; i < cells; ++i) {
    const std::size_t lo = partition.indices[i];
    const std::size_t hi = partition.indices[i + 1];
    out.times[i + 1] = partition.time(i + 1);
    for (int c = 0; c < d; ++c) delta[c] = path.value(hi, c) - path.value(lo, c);
    const double* prev = out.at(i);
    double* cur = out.values.data() + (i + 1) * static_cast<std::size_t>(d) * d;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        cur[r * d + c] = prev[r * d + c] + delta[r] * delta[c];
  }
  return out;
}

std::vector<QvLevel> quadratic_variation(const SampledPath& path, const PartitionSequence& seq) {
  std::vector<QvLevel> out;
  out.reserve(seq.levels.size());
  for (const auto& [n, partition] : seq.levels) out.push_back({n, qv_along(path, partition)});
  return out;
}

// ---- pathwise integral ----------------------------------------------------

const char* to_string(IntegralVariant variant) {
  return variant == IntegralVariant::along_approx ? "along_approx" : "along_path";
}

IntegralEstimate follmer_integral(const Functional& f, const SampledPath& path,
                                  const Partition& partition, int level, IntegralVariant variant,
                                  bool want_partials) {
  const int d = path.dim();
  const std::size_t cells = partition.cells();
  SampledPath approx;
  const SampledPath* history = nullptr;
  if (variant == IntegralVariant::along_approx) {
    approx = piecewise_constant_approx(path, partition);
    history = &approx;
  }
  Evaluator ev(f, path, history);
  IntegralEstimate out;
  out.level = level;
  out.variant = variant;
  std::vector<double> terms(cells);
  Jet jet;
  for (std::size_t i = 0; i < cells; ++i) {
    const std::size_t lo = partition.indices[i];
    const std::size_t hi = partition.indices[i + 1];
    ev.jet(lo, 1, jet);
    double term = 0.0;
    for (int c = 0; c < d; ++c) term += jet.grad[c] * (path.value(hi, c) - path.value(lo, c));
    terms[i] = term;
  }
  out.value = pairwise_sum(terms);
  if (want_partials) {
    out.partial_sums.resize(cells + 1);
    out.partial_sums[0] = 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
      acc += terms[i];
      out.partial_sums[i + 1] = acc;
    }
  }
  return out;
}

std::vector<IntegralEstimate> follmer_integral(const Functional& f, const SampledPath& path,
                                               const PartitionSequence& seq, IntegralVariant variant) {
  std::vector<IntegralEstimate> out;
  out.reserve(seq.levels.size());
  for (const auto& [n, partition] : seq.levels)
    out.push_back(follmer_integral(f, path, partition, n, variant));
  return out;
}

// ---- change of variable ---------------------------------------------------

double change_of_variable_residual(const Functional& f, const SampledPath& path,
                                   const Partition& partition) {
  const int d = path.dim();
  const std::size_t cells = partition.cells();
  Evaluator ev(f, path);
  const double lhs = ev.value(partition.indices[cells]) - ev.value(partition.indices[0]);

  const bool no_time_term = f.horizontal_is_zero();
  std::vector<double> time_terms(no_time_term ? 0 : cells, 0.0);
  std::vector<double> grad_terms(cells);
  std::vector<double> hess_terms(cells);
  std::vector<double> delta(d);
  Jet jet;
  for (std::size_t i = 0; i < cells; ++i) {
    const std::size_t lo = partition.indices[i];
    const std::size_t hi = partition.indices[i + 1];
    for (int c = 0; c < d; ++c) delta[c] = path.value(hi, c) - path.value(lo, c);
    ev.jet(lo, 2, jet);
    if (!no_time_term)
      time_terms[i] = ev.horizontal(lo) * (partition.time(i + 1) - partition.time(i));
    double g = 0.0;
    for (int c = 0; c < d; ++c) g += jet.grad[c] * delta[c];
    grad_terms[i] = g;
    double h = 0.0;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) h += jet.hess[static_cast<std::size_t>(r) * d + c] * delta[r] * delta[c];
    hess_terms[i] = 0.5 * h;
  }
  const double time_integral = no_time_term ? 0.0 : pairwise_sum(time_terms);
  const double riemann = pairwise_sum(grad_terms);
  const double second = pairwise_sum(hess_terms);
  return std::abs(lhs - time_integral - second - riemann);
}

// ---- isometry gap ---------------------------------------------------------

std::vector<IsometryLevel> isometry_gap(const Functional& f, const SampledPath& path,
                                        const PartitionSequence& seq) {
  const int d = path.dim();
  Evaluator ev(f, path);
  std::vector<IsometryLevel> out;
  out.reserve(seq.levels.size());
  Jet jet;
  for (const auto& [n, partition] : seq.levels) {
    const std::size_t cells = partition.cells();
    std::vector<double> lhs_terms(cells);
    std::vector<double> rhs_terms(cells);
    double foscill = 0.0;
    double prev = ev.value(partition.indices[0]);
    for (std::size_t i = 0; i < cells; ++i) {
      const std::size_t lo = partition.indices[i];
      const std::size_t hi = partition.indices[i + 1];
      const double cur = ev.value(hi);
      const double df = cur - prev;
      lhs_terms[i] = df * df;
      foscill = std::max(foscill, std::abs(df));
      ev.jet(lo, 1, jet);
      double g = 0.0;
      for (int c = 0; c < d; ++c) g += jet.grad[c] * (path.value(hi, c) - path.value(lo, c));
      rhs_terms[i] = g * g;
      prev = cur;
    }
    IsometryLevel row;
    row.n = n;
    row.lhs = pairwise_sum(lhs_terms);
    row.rhs = pairwise_sum(rhs_terms);
    row.gap = std::abs(row.lhs - row.rhs);
    row.rel_gap = row.gap / std::max({std::abs(row.lhs), std::abs(row.rhs), 1e-300});
    row.mesh = mesh(partition);
    row.osc = oscillation(path, partition);
    row.foscill = foscill;
    out.push_back(row);
  }
  return out;
}

// ---- remainders and exponent fits -----------------------------------------

std::vector<double> dyadic_scales(double horizon, int j_min, int j_max) {
  if (j_min > j_max) throw ParameterError("dyadic_scales: j_min must not exceed j_max");
  std::vector<double> out;
  for (int j = j_min; j <= j_max; ++j) out.push_back(horizon * std::ldexp(1.0, -j));
  return out;
}

namespace {

std::vector<RemainderSample> sample_residuals(const Functional& f, const SampledPath& path,
                                              const std::vector<double>& scales, int count,
                                              std::uint64_t seed, bool second_order) {
  if (scales.empty()) throw ParameterError("residual sampling: empty scale list");
  if (count < 16) throw ParameterError("residual sampling: need at least 16 samples per scale");
  if (second_order && f.state_order() < 3)
    throw CapabilityError("second-order residual needs third-order vertical capability");
  const int d = path.dim();
  const std::size_t M = path.grid();
  const double dt = path.dt();
  Evaluator ev(f, path);
  const bool no_time_term = f.horizontal_is_zero();
  std::vector<RemainderSample> out;
  out.reserve(scales.size() * static_cast<std::size_t>(count));
  Jet jet;
  std::vector<double> delta(d);
  for (std::size_t j = 0; j < scales.size(); ++j) {
    const double scale = scales[j];
    if (!(scale > 0.0) || scale > path.horizon())
      throw ParameterError("residual sampling: scale outside (0, T]");
    std::size_t gap = static_cast<std::size_t>(std::llround(scale / dt));
    if (gap == 0) gap = 1;
    if (gap > M) gap = M;
    const std::uint64_t key = rng::stream_key(seed, j);
    for (int i = 0; i < count; ++i) {
      const std::size_t lo = rng::below(key, static_cast<std::uint64_t>(i), M - gap + 1);
      const std::size_t hi = lo + gap;
      ev.jet(lo, second_order ? 2 : 1, jet);
      for (int c = 0; c < d; ++c) delta[c] = path.value(hi, c) - path.value(lo, c);
      double acc = ev.value(hi) - jet.v;
      for (int c = 0; c < d; ++c) acc -= jet.grad[c] * delta[c];
      if (second_order) {
        double h = 0.0;
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c)
            h += jet.hess[static_cast<std::size_t>(r) * d + c] * delta[r] * delta[c];
        acc -= 0.5 * h;
        if (!no_time_term) {
          // Left-sum of the time derivative over [t, s) on the master grid.
          double t_int = 0.0;
          for (std::size_t k = lo; k < hi; ++k) t_int += ev.horizontal(k) * dt;
          acc -= t_int;
        }
      }
      RemainderSample sample;
      sample.t = path.time(lo);
      sample.s = path.time(hi);
      sample.scale = static_cast<double>(gap) * dt;
      sample.value = std::abs(acc);
      out.push_back(sample);
    }
  }
  return out;
}

}  // namespace

std::vector<RemainderSample> remainder_samples(const Functional& f, const SampledPath& path,
                                               const std::vector<double>& scales, int count,
                                               std::uint64_t seed) {
  return sample_residuals(f, path, scales, count, seed, false);
}

std::vector<RemainderSample> expansion_residual_samples(const Functional& f, const SampledPath& path,
                                                        const std::vector<double>& scales, int count,
                                                        std::uint64_t seed) {
  return sample_residuals(f, path, scales, count, seed, true);
}

ExponentFit remainder_exponent_fit(const std::vector<RemainderSample>& samples) {
  if (samples.empty()) throw ParameterError("exponent fit: no samples");
  std::map<double, double> max_by_scale;
  for (const RemainderSample& s : samples) {
    auto [it, fresh] = max_by_scale.try_emplace(s.scale, s.value);
    if (!fresh) it->second = std::max(it->second, s.value);
  }
  constexpr double kFloor = 1e-14;
  std::vector<double> log_scale, log_max;
  for (const auto& [scale, value] : max_by_scale) {
    if (value < kFloor) continue;
    log_scale.push_back(std::log(scale));
    log_max.push_back(std::log(value));
  }
  ExponentFit fit;
  if (log_scale.empty()) {
    fit.exponent = std::numeric_limits<double>::infinity();
    fit.r_squared = 1.0;
    fit.all_below_floor = true;
    fit.scales_used = 0;
    return fit;
  }
  fit.scales_used = static_cast<int>(log_scale.size());
  if (log_scale.size() < 2) {
    fit.exponent = std::numeric_limits<double>::quiet_NaN();
    return fit;
  }
  const LinearFit lf = linear_fit(log_scale, log_max);
  fit.exponent = lf.slope;
  fit.r_squared = lf.r_squared;
  return fit;
}

// ---- rough-smooth decomposition -------------------------------------------

Decomposition rough_smooth_decompose(const Functional& f, const SampledPath& base,
                                     const PartitionSequence& seq) {
  if (seq.levels.empty()) throw ParameterError("decomposition: empty partition sequence");
  const int d = base.dim();
  Evaluator ev(f, base);
  Decomposition out;

  const Partition& finest = seq.finest();
  const std::size_t cells = finest.cells();
  for (std::size_t i = 0; i < cells; ++i) {
    if (base.row_distance(finest.indices[i + 1], finest.indices[i]) == 0.0) {
      out.degenerate_qv = true;
      break;
    }
  }

  out.times.resize(cells + 1);
  out.phi.assign((cells + 1) * static_cast<std::size_t>(d), 0.0);
  out.rough.resize(cells + 1);
  out.smooth.resize(cells + 1);
  Jet jet;
  double acc = 0.0;
  out.times[0] = finest.time(0);
  const double f0 = ev.value(finest.indices[0]);
  out.rough[0] = 0.0;
  out.smooth[0] = f0;
  double prev_value = f0;
  for (std::size_t i = 0; i < cells; ++i) {
    const std::size_t lo = finest.indices[i];
    const std::size_t hi = finest.indices[i + 1];
    ev.jet(lo, 1, jet);
    for (int c = 0; c < d; ++c) out.phi[i * static_cast<std::size_t>(d) + c] = jet.grad[c];
    double term = 0.0;
    for (int c = 0; c < d; ++c) term += jet.grad[c] * (base.value(hi, c) - base.value(lo, c));
    acc += term;
    const double cur_value = ev.value(hi);
    out.times[i + 1] = finest.time(i + 1);
    out.rough[i + 1] = acc;
    // Accumulate the defect by increments so an exact per-cell cancellation
    // (identity functional) survives in floating point.
    out.smooth[i + 1] = out.smooth[i] + (cur_value - prev_value - term);
    prev_value = cur_value;
  }
  // phi at the right end mirrors the last left point (no further increment).
  ev.jet(finest.indices[cells], 1, jet);
  for (int c = 0; c < d; ++c) out.phi[cells * static_cast<std::size_t>(d) + c] = jet.grad[c];

  for (const auto& [n, partition] : seq.levels) {
    const std::size_t nc = partition.cells();
    std::vector<double> f_terms(nc), s_terms(nc);
    Jet jn;
    double prev_f = ev.value(partition.indices[0]);
    for (std::size_t i = 0; i < nc; ++i) {
      const std::size_t lo = partition.indices[i];
      const std::size_t hi = partition.indices[i + 1];
      ev.jet(lo, 1, jn);
      double term = 0.0;
      for (int c = 0; c < d; ++c) term += jn.grad[c] * (base.value(hi, c) - base.value(lo, c));
      const double cur_f = ev.value(hi);
      const double df = cur_f - prev_f;
      const double ds = df - term;  // defect increment, exact per cell
      f_terms[i] = df * df;
      s_terms[i] = ds * ds;
      prev_f = cur_f;
    }
    DecompositionLevel level;
    level.n = n;
    level.qv_transformed = pairwise_sum(f_terms);
    level.qv_smooth = pairwise_sum(s_terms);
    level.qv_ratio = level.qv_transformed > 0.0 ? level.qv_smooth / level.qv_transformed : 0.0;
    out.levels.push_back(level);
  }
  return out;
}

// ---- Monte Carlo second-moment check --------------------------------------

int worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  long cap = static_cast<long>(hw);
  if (const char* env = std::getenv("FQV_THREADS"); env != nullptr && *env != '\0') {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) cap = std::min(cap, v);
  }
  return static_cast<int>(std::min<long>(cap, 256));
}

ItoMcResult ito_isometry_mc(const Functional& f, int count, std::uint64_t seed0, int level,
                            std::size_t grid, double horizon, int dim) {
  if (count < 50) throw ParameterError("Monte Carlo check needs at least 50 seeds");
  if (level < 0) throw ParameterError("negative partition level");
  const auto seq = dyadic_sequence(grid, horizon, level, level);
  const Partition& partition = seq.at_level(level);

  std::vector<double> lhs(count), rhs(count);
  auto run_one = [&](int j) {
    const SampledPath path = generate_brownian(dim, horizon, grid, seed0 + static_cast<std::uint64_t>(j));
    const IntegralEstimate est =
        follmer_integral(f, path, partition, level, IntegralVariant::along_path);
    lhs[j] = est.value * est.value;

    Evaluator ev(f, path);
    Jet jet;
    const std::size_t cells = partition.cells();
    std::vector<double> terms(cells);
    for (std::size_t i = 0; i < cells; ++i) {
      ev.jet(partition.indices[i], 1, jet);
      double g2 = 0.0;
      for (int c = 0; c < dim; ++c) g2 += jet.grad[c] * jet.grad[c];
      terms[i] = g2 * (partition.time(i + 1) - partition.time(i));
    }
    rhs[j] = pairwise_sum(terms);
  };

  const int workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (int j = 0; j < count; ++j) run_one(j);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int j = w; j < count; j += workers) run_one(j);
      });
    for (std::thread& t : pool) t.join();
  }

  ItoMcResult out;
  out.seeds = count;
  const double n = static_cast<double>(count);
  out.mean_lhs = pairwise_sum(lhs) / n;
  out.mean_rhs = pairwise_sum(rhs) / n;
  std::vector<double> sq(count);
  auto stderr_of = [&](const std::vector<double>& xs, double mean) {
    for (int j = 0; j < count; ++j) sq[j] = (xs[j] - mean) * (xs[j] - mean);
    const double var = pairwise_sum(sq) / (n - 1.0);
    return std::sqrt(var / n);
  };
  out.se_lhs = stderr_of(lhs, out.mean_lhs);
  out.se_rhs = stderr_of(rhs, out.mean_rhs);
  out.se_combined = std::sqrt(out.se_lhs * out.se_lhs + out.se_rhs * out.se_rhs);
  std::vector<double> diff(count);
  for (int j = 0; j < count; ++j) diff[j] = lhs[j] - rhs[j];
  const double mean_diff = pairwise_sum(diff) / n;
  out.se_diff = stderr_of(diff, mean_diff);
  return out;
}

}  // namespace fqv
