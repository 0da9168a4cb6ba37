#include <cmath>
#include <cstdlib>
#include <vector>

#include "doctest.h"
#include "fqv/calculus.hpp"
#include "fqv/errors.hpp"
#include "fqv/functional.hpp"
#include "fqv/numerics.hpp"
#include "fqv/partition.hpp"
#include "fqv/path.hpp"

using namespace fqv;

namespace {

SampledPath unit_ramp(std::size_t grid) {
  SmoothSpec spec;
  spec.per_coord = {{SmoothTerm{SmoothTerm::Shape::power, 1.0, 1.0, 1.0}}};
  return generate_smooth(1, 1.0, grid, spec);
}

}  // namespace

// ===========================================================================
// Numerics
// ===========================================================================

TEST_CASE("pairwise summation is deterministic and cancellation-friendly") {
  std::vector<double> xs;
  for (int i = 0; i < 4097; ++i) xs.push_back(i % 2 == 0 ? 1.0 : -1.0);
  xs.push_back(0.5);
  CHECK(pairwise_sum(xs) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
  CHECK(pairwise_sum(std::vector<double>{3.25}) == 3.25);
}

TEST_CASE("linear fit recovers slope and intercept on clean data") {
  std::vector<double> x, y;
  for (int i = 0; i < 12; ++i) {
    x.push_back(0.5 * i);
    y.push_back(2.0 - 3.0 * x.back());
  }
  const LinearFit fit = linear_fit(x, y);
  CHECK(fit.slope == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

// ===========================================================================
// Quadratic variation
// ===========================================================================

TEST_CASE("qv of the unit ramp halves with each dyadic level") {
  const SampledPath ramp = unit_ramp(1024);
  const PartitionSequence seq = dyadic_sequence(1024, 1.0, 4, 8);
  for (const auto& lvl : quadratic_variation(ramp, seq))
    CHECK(lvl.qv.total() == doctest::Approx(std::ldexp(1.0, -lvl.n)).epsilon(1e-13));
}

TEST_CASE("cross quadratic variation obeys the polarization identity") {
  const SampledPath w = generate_brownian(2, 1.0, 4096, 5);
  const PartitionSequence seq = dyadic_sequence(4096, 1.0, 6, 6);
  const Partition& p = seq.finest();
  const StepMatrixFunction qv = qv_along(w, p);

  SampledPath sum(1, 1.0, 4096, "sum"), diff(1, 1.0, 4096, "diff");
  for (std::size_t k = 0; k <= 4096; ++k) {
    sum.value(k, 0) = w.value(k, 0) + w.value(k, 1);
    diff.value(k, 0) = w.value(k, 0) - w.value(k, 1);
  }
  const double polarized = 0.25 * (qv_along(sum, p).total() - qv_along(diff, p).total());
  const double scale = std::abs(qv.total(0, 0)) + std::abs(qv.total(1, 1));
  CHECK(std::abs(qv.total(0, 1) - polarized) <= 1e-10 * scale);
  CHECK(qv.total(1, 0) == qv.total(0, 1));
}

TEST_CASE("mirrored coordinates polarize to the negated diagonal") {
  const SampledPath w = generate_brownian(1, 1.0, 4096, 5);
  SampledPath two(2, 1.0, 4096, "mirror");
  for (std::size_t k = 0; k <= 4096; ++k) {
    two.value(k, 0) = w.value(k, 0);
    two.value(k, 1) = -w.value(k, 0);
  }
  const StepMatrixFunction qv = qv_along(two, dyadic_sequence(4096, 1.0, 6, 6).finest());
  CHECK(qv.total(0, 1) == doctest::Approx(-qv.total(0, 0)).epsilon(1e-14));
}

TEST_CASE("qv increments of a correlated pair stay positive semidefinite") {
  const std::vector<double> corr = {1.0, 0.7, 0.7, 1.0};
  const SampledPath two = generate_brownian(2, 1.0, 4096, 3, &corr);
  const StepMatrixFunction qv = qv_along(two, dyadic_sequence(4096, 1.0, 5, 5).finest());
  for (std::size_t i = 1; i < qv.times.size(); ++i) {
    const double a = qv.entry(i, 0, 0) - qv.entry(i - 1, 0, 0);
    const double b = qv.entry(i, 0, 1) - qv.entry(i - 1, 0, 1);
    const double d = qv.entry(i, 1, 1) - qv.entry(i - 1, 1, 1);
    const double tr = a + d, det = a * d - b * b;
    const double min_eig = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
    CHECK(min_eig >= -1e-12);
  }
}

// ===========================================================================
// Pathwise integral
// ===========================================================================

TEST_CASE("identity functional telescopes in both variants at every level") {
  const SampledPath w = generate_brownian(1, 1.0, 65536, 42);
  const PartitionSequence seq = dyadic_sequence(65536, 1.0, 4, 10);
  const Functional f = Functional::from_spec("x");
  const double total = w.value(65536, 0) - w.value(0, 0);
  for (auto variant : {IntegralVariant::along_path, IntegralVariant::along_approx}) {
    for (const auto& est : follmer_integral(f, w, seq, variant))
      CHECK(est.value == doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("quadratic identity holds per level and variants coincide") {
  const SampledPath w = generate_brownian(1, 1.0, 65536, 42);
  const PartitionSequence seq = dyadic_sequence(65536, 1.0, 4, 10);
  const Functional f = Functional::from_spec("x2");
  const auto qv = quadratic_variation(w, seq);
  const auto along_path = follmer_integral(f, w, seq, IntegralVariant::along_path);
  const auto along_approx = follmer_integral(f, w, seq, IntegralVariant::along_approx);
  const double wt = w.value(65536, 0);
  for (std::size_t i = 0; i < along_path.size(); ++i) {
    const double expect = wt * wt - qv[i].qv.total();
    CHECK(std::abs(along_path[i].value - expect) <= 1e-10 * (1.0 + std::abs(expect)));
    CHECK(along_approx[i].value == along_path[i].value);
  }
}

TEST_CASE("partial sums accumulate to the integral estimate") {
  const SampledPath w = generate_brownian(1, 1.0, 4096, 8);
  const Partition p = dyadic_sequence(4096, 1.0, 6, 6).finest();
  const IntegralEstimate est = follmer_integral(Functional::from_spec("x2"), w, p, 6,
                                                IntegralVariant::along_path, true);
  REQUIRE(est.partial_sums.size() == p.cells() + 1);
  CHECK(est.partial_sums.front() == 0.0);
  CHECK(est.partial_sums.back() == doctest::Approx(est.value).epsilon(1e-14));
}

TEST_CASE("change of variable closes exactly for linear and quadratic maps") {
  const SampledPath w = generate_brownian(1, 1.0, 65536, 42);
  const PartitionSequence seq = dyadic_sequence(65536, 1.0, 4, 10);
  CHECK(change_of_variable_residual(Functional::from_spec("x"), w, seq.at_level(10)) <= 1e-12);
  CHECK(change_of_variable_residual(Functional::from_spec("x2"), w, seq.at_level(10)) <= 1e-10);
  const double r8 = change_of_variable_residual(Functional::from_spec("x3"), w, seq.at_level(8));
  const double r10 = change_of_variable_residual(Functional::from_spec("x3"), w, seq.at_level(10));
  CHECK(r10 < r8);
}

// ===========================================================================
// Isometry gap
// ===========================================================================

TEST_CASE("identity functional satisfies the isometry identically") {
  const SampledPath w = generate_brownian(1, 1.0, 65536, 42);
  const PartitionSequence seq = dyadic_sequence(65536, 1.0, 4, 10);
  for (const auto& row : isometry_gap(Functional::from_spec("x"), w, seq)) {
    CHECK(std::abs(row.gap) <= 1e-12);
    CHECK(row.mesh > 0.0);
    CHECK(row.osc > 0.0);
    CHECK(std::isfinite(row.foscill));
  }
}

TEST_CASE("quadratic functional's relative gap shrinks along the ladder") {
  const SampledPath w = generate_brownian(1, 1.0, 65536, 42);
  const PartitionSequence seq = dyadic_sequence(65536, 1.0, 4, 10);
  const auto rows = isometry_gap(Functional::from_spec("x2"), w, seq);
  CHECK(rows.back().rel_gap < rows.front().rel_gap);
  CHECK(rows.back().rel_gap < 0.05);
}

TEST_CASE("gap decomposes into remainder cross terms") {
  const SampledPath w = generate_brownian(1, 1.0, 65536, 42);
  const PartitionSequence seq = dyadic_sequence(65536, 1.0, 10, 10);
  const auto rows = isometry_gap(Functional::from_spec("x2"), w, seq);
  const Evaluator ev(Functional::from_spec("x2"), w);
  const Partition& p = seq.finest();
  Jet jet;
  double recon = 0.0;
  for (std::size_t i = 0; i < p.cells(); ++i) {
    const std::size_t lo = p.indices[i], hi = p.indices[i + 1];
    ev.jet(lo, 1, jet);
    const double gd = jet.grad[0] * (w.value(hi, 0) - w.value(lo, 0));
    const double df = ev.value(hi) - ev.value(lo);
    const double r = df - gd;
    recon += r * r + 2.0 * r * gd;
  }
  CHECK(std::abs(rows[0].lhs - rows[0].rhs - recon) <= 1e-10 * (1.0 + std::abs(recon)));
}

// ===========================================================================
// Remainder scaling
// ===========================================================================

TEST_CASE("remainder fits recover polynomial scaling orders") {
  const SampledPath ramp = unit_ramp(1024);
  const std::vector<double> scales = dyadic_scales(1.0, 3, 7);

  const auto sq = remainder_samples(Functional::from_spec("x2"), ramp, scales, 32, 9);
  const ExponentFit fit_sq = remainder_exponent_fit(sq);
  CHECK(fit_sq.exponent == doctest::Approx(2.0).epsilon(0.01));
  CHECK_FALSE(fit_sq.all_below_floor);

  const auto cube = expansion_residual_samples(Functional::from_spec("x3"), ramp, scales, 32, 9);
  CHECK(remainder_exponent_fit(cube).exponent == doctest::Approx(3.0).epsilon(0.01));
}

TEST_CASE("linear functionals trip the degenerate remainder flag") {
  const SampledPath w = generate_brownian(1, 1.0, 65536, 42);
  const std::vector<double> scales = dyadic_scales(1.0, 3, 7);
  const ExponentFit fit =
      remainder_exponent_fit(remainder_samples(Functional::from_spec("x"), w, scales, 32, 9));
  CHECK(fit.all_below_floor);
  CHECK(std::isinf(fit.exponent));

  const ExponentFit fit2 = remainder_exponent_fit(
      expansion_residual_samples(Functional::from_spec("x2"), unit_ramp(1024), scales, 32, 9));
  CHECK(fit2.all_below_floor);
}

TEST_CASE("remainder sampling validates its preconditions") {
  const SampledPath w = generate_brownian(1, 1.0, 1024, 1);
  const std::vector<double> scales = dyadic_scales(1.0, 3, 5);
  CHECK_THROWS_AS(remainder_samples(Functional::from_spec("x2"), w, scales, 8, 9), ParameterError);
  CHECK_THROWS_AS(remainder_samples(Functional::from_spec("x2"), w, {2.0}, 32, 9),
                  ParameterError);
}

// ===========================================================================
// Rough-smooth decomposition
// ===========================================================================

TEST_CASE("unit-gradient decomposition has exactly vanishing smooth qv") {
  const SampledPath w = generate_brownian(1, 1.0, 65536, 42);
  const PartitionSequence seq = dyadic_sequence(65536, 1.0, 4, 10);
  const Decomposition dec = rough_smooth_decompose(Functional::from_spec("x"), w, seq);
  CHECK_FALSE(dec.degenerate_qv);
  for (const auto& lvl : dec.levels) CHECK(lvl.qv_ratio == 0.0);
  for (double s : dec.smooth) CHECK(s == doctest::Approx(w.value(0, 0)).epsilon(1e-12));
}

TEST_CASE("pure running integrals put everything into the smooth part") {
  const SampledPath w = generate_brownian(1, 1.0, 65536, 42);
  const PartitionSequence seq = dyadic_sequence(65536, 1.0, 4, 10);
  const Decomposition dec = rough_smooth_decompose(Functional::from_spec("runint_x"), w, seq);
  for (double p : dec.phi) CHECK(p == 0.0);
  for (double r : dec.rough) CHECK(r == 0.0);
  CHECK(dec.levels.back().qv_smooth < dec.levels.front().qv_smooth);
  CHECK(dec.levels.back().qv_smooth < 1e-3);
}

TEST_CASE("smooth qv share of the squared path decays along the ladder") {
  const SampledPath w = generate_brownian(1, 1.0, 65536, 42);
  const PartitionSequence seq = dyadic_sequence(65536, 1.0, 4, 10);
  const Decomposition dec = rough_smooth_decompose(Functional::from_spec("x2"), w, seq);
  CHECK(dec.levels.back().qv_ratio < dec.levels.front().qv_ratio);
}

TEST_CASE("constant base paths flag degenerate qv but still decompose") {
  const Decomposition dec =
      rough_smooth_decompose(Functional::from_spec("x"), generate_constant(1, 1.0, 1024, 2.0),
                             dyadic_sequence(1024, 1.0, 3, 5));
  CHECK(dec.degenerate_qv);
  CHECK(dec.levels.size() == 3);
}

// ===========================================================================
// Monte Carlo isometry
// ===========================================================================

TEST_CASE("unit-gradient functional integrates the horizon exactly on the right") {
  const ItoMcResult res = ito_isometry_mc(Functional::from_spec("x"), 64, 100, 5, 1024, 1.0);
  CHECK(res.mean_rhs == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.seeds == 64);
  CHECK(res.se_combined > 0.0);
}

TEST_CASE("monte carlo results are identical across worker counts") {
  setenv("FQV_THREADS", "1", 1);
  const ItoMcResult a = ito_isometry_mc(Functional::from_spec("x2"), 64, 100, 5, 1024, 1.0);
  setenv("FQV_THREADS", "4", 1);
  const ItoMcResult b = ito_isometry_mc(Functional::from_spec("x2"), 64, 100, 5, 1024, 1.0);
  unsetenv("FQV_THREADS");
  CHECK(a.mean_lhs == b.mean_lhs);
  CHECK(a.mean_rhs == b.mean_rhs);
  CHECK(a.se_diff == b.se_diff);
}

TEST_CASE("monte carlo validates the seed count precondition") {
  CHECK_THROWS_AS(ito_isometry_mc(Functional::from_spec("x"), 10, 100, 5, 1024, 1.0),
                  ParameterError);
}
