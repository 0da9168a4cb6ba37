// End-to-end acceptance gate.  Each criterion prints exactly one PASS/FAIL
// line; details go on indented lines below it.  Exit status 0 only when every
// criterion holds.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "fqv/calculus.hpp"
#include "fqv/experiment.hpp"
#include "fqv/functional.hpp"
#include "fqv/partition.hpp"
#include "fqv/path.hpp"
#include "fqv/rng.hpp"

using namespace fqv;

namespace {

constexpr double kT = 1.0;
constexpr std::size_t kGrid = 1u << 20;

int g_failed = 0;

void criterion(int id, const char* desc, bool ok) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", id, desc);
  if (!ok) ++g_failed;
}

void note(const std::string& text) { std::printf("    %s\n", text.c_str()); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

const IsometryLevel* iso_at(const std::vector<IsometryLevel>& rows, int n) {
  for (const IsometryLevel& row : rows)
    if (row.n == n) return &row;
  return nullptr;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.empty() ? 0.0 : v[v.size() / 2];
}

SampledPath linear_path(std::size_t grid) {
  SmoothSpec spec;
  spec.per_coord = {{SmoothTerm{SmoothTerm::Shape::power, 1.0, 1.0, 1.0}}};
  return generate_smooth(1, kT, grid, spec);
}

// ---------------------------------------------------------------------------

void c1_exact_identities(const SampledPath& w, const PartitionSequence& seq) {
  bool ok = true;
  const Functional fx = Functional::from_spec("x");
  const Functional fx2 = Functional::from_spec("x2");
  const double w0 = w.value(0, 0);
  const double wT = w.value(w.grid(), 0);

  double worst_tel = 0.0, worst_quad = 0.0, worst_res = 0.0;
  for (const auto& [n, part] : seq.levels) {
    const double tel = follmer_integral(fx, w, part, n, IntegralVariant::along_path).value;
    const double tel_err = std::abs(tel - (wT - w0)) / (1.0 + std::abs(wT - w0));
    worst_tel = std::max(worst_tel, tel_err);

    const double qv_n = qv_along(w, part).total(0, 0);
    const double quad = follmer_integral(fx2, w, part, n, IntegralVariant::along_path).value;
    const double expect = wT * wT - w0 * w0 - qv_n;
    const double quad_err = std::abs(quad - expect) / (1.0 + std::abs(expect));
    worst_quad = std::max(worst_quad, quad_err);

    const double res = change_of_variable_residual(fx2, w, part);
    worst_res = std::max(worst_res, res / (1.0 + std::abs(wT * wT - w0 * w0)));
  }
  ok = ok && worst_tel <= 1e-10 && worst_quad <= 1e-10 && worst_res <= 1e-10;

  // Polarization: off-diagonal qv of a correlated pair vs the sum/difference
  // construction, level by level.
  const std::vector<double> corr = {1.0, 0.7, 0.7, 1.0};
  const SampledPath pair = generate_brownian(2, kT, kGrid, 42, &corr);
  std::vector<double> inc_sum(kGrid), inc_diff(kGrid);
  for (std::size_t k = 0; k < kGrid; ++k) {
    const double d0 = pair.value(k + 1, 0) - pair.value(k, 0);
    const double d1 = pair.value(k + 1, 1) - pair.value(k, 1);
    inc_sum[k] = d0 + d1;
    inc_diff[k] = d0 - d1;
  }
  const SampledPath psum = path_from_increments(1, kT, inc_sum);
  const SampledPath pdiff = path_from_increments(1, kT, inc_diff);
  double worst_pol = 0.0;
  for (const auto& [n, part] : seq.levels) {
    (void)n;
    const double off = qv_along(pair, part).total(0, 1);
    const double pol =
        0.25 * (qv_along(psum, part).total(0, 0) - qv_along(pdiff, part).total(0, 0));
    worst_pol = std::max(worst_pol, std::abs(off - pol) / (1.0 + std::abs(off)));
  }
  ok = ok && worst_pol <= 1e-10;

  criterion(1, "exact algebraic identities hold at every level", ok);
  note("worst relative error: telescoping " + fmt(worst_tel) + ", quadratic " + fmt(worst_quad) +
       ", change-of-variable " + fmt(worst_res) + ", polarization " + fmt(worst_pol));
}

void c2_qv_target(const SampledPath& w, const PartitionSequence& seq) {
  const double qv = qv_along(w, seq.at_level(16)).total(0, 0);
  const bool ok = std::abs(qv - 1.0) < 0.05;
  criterion(2, "quadratic variation of the seeded Brownian path lands near its variance", ok);
  note("qv at level 16 = " + fmt(qv));
}

void c3_isometry_dyadic(const SampledPath& w, const PartitionSequence& seq) {
  bool ok = true;
  std::string detail;
  for (const char* spec : {"x2", "x_runint_x"}) {
    const auto rows = isometry_gap(Functional::from_spec(spec), w, seq);
    const IsometryLevel* r16 = iso_at(rows, 16);
    const IsometryLevel* r13 = iso_at(rows, 13);
    const bool here = r16 && r13 && r16->rel_gap < 0.10 && r16->gap < r13->gap;
    ok = ok && here;
    if (!detail.empty()) detail += "; ";
    detail += std::string(spec) + " rel_gap(16)=" + fmt(r16 ? r16->rel_gap : -1.0) +
              " gap(16)=" + fmt(r16 ? r16->gap : -1.0) + " gap(13)=" + fmt(r13 ? r13->gap : -1.0);
  }
  criterion(3, "isometry gap shrinks along the dyadic ladder", ok);
  note(detail);
}

void c4_isometry_lebesgue() {
  bool ok = true;
  std::string detail;
  for (const char* spec : {"x2", "x_runint_x"}) {
    ExperimentConfig config;
    config.kind = ExperimentKind::isometry_lebesgue;
    config.functional = spec;
    config.partition.kind = PartitionKind::lebesgue;
    config.partition.n_min = 5;
    config.partition.n_max = 9;
    const ConvergenceReport report = run_experiment(config);
    const double rel = report.rows.empty() ? 1.0 : report.rows.back().rel_gap;
    ok = ok && rel < 0.15 && report.pass;
    if (!detail.empty()) detail += "; ";
    detail += std::string(spec) + " rel_gap(finest)=" + fmt(rel);
  }
  // A motionless path cannot refine its hitting ladder: expect a flag, not a
  // failure.
  ExperimentConfig flat;
  flat.kind = ExperimentKind::isometry_lebesgue;
  flat.functional = "x2";
  flat.path = path_spec_from_string("constant:1.0");
  flat.path.grid = 1u << 14;
  flat.partition.kind = PartitionKind::lebesgue;
  flat.partition.n_min = 5;
  flat.partition.n_max = 9;
  const ConvergenceReport still = run_experiment(flat);
  bool flagged = false;
  for (const std::string& f : still.flags) flagged = flagged || f == "mesh non-vanishing";
  ok = ok && flagged && still.pass;
  criterion(4, "isometry holds along hitting-time ladders; flat paths flag a stuck mesh", ok);
  note(detail + "; constant path flagged=" + (flagged ? "yes" : "no"));
}

void c5_lebesgue_counts(const SampledPath& w) {
  const PartitionSequence seq = lebesgue_sequence(w, 4, 9);
  bool mesh_ok = true;
  double prev = -1.0;
  for (const auto& [n, part] : seq.levels) {
    (void)n;
    const double m = mesh(part);
    if (prev >= 0.0 && m > prev + 1e-15) mesh_ok = false;
    prev = m;
  }
  bool counts_ok = true;
  std::string detail = "scaled counts:";
  for (const auto& [n, part] : seq.levels) {
    if (n < 5 || n > 8) continue;
    const double scaled =
        (static_cast<double>(part.cells()) - 1.0) * std::pow(4.0, -static_cast<double>(n));
    detail += " n=" + std::to_string(n) + ":" + fmt(scaled);
    if (scaled < 0.8 || scaled > 1.2) counts_ok = false;
  }
  criterion(5, "hitting-ladder mesh shrinks and scaled crossing counts track the variance",
            mesh_ok && counts_ok);
  note(detail + (mesh_ok ? "" : "; mesh not monotone"));
}

void c6_uniqueness(const SampledPath& w, const PartitionSequence& seq) {
  const Partition& p16 = seq.at_level(16);
  bool ok = true;
  std::string detail;
  for (const char* spec : {"x2", "x3", "sin_of_x2", "tx", "x_runint_x"}) {
    const Functional f = Functional::from_spec(spec);
    const double a = follmer_integral(f, w, p16, 16, IntegralVariant::along_approx).value;
    const double b = follmer_integral(f, w, p16, 16, IntegralVariant::along_path).value;
    const double rel = std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
    ok = ok && rel < 1e-2;
    if (!detail.empty()) detail += "; ";
    detail += std::string(spec) + " rel=" + fmt(rel);
  }
  criterion(6, "the integral along the step approximation matches the one along the path", ok);
  note(detail);
}

void c7_remainder_exponent() {
  bool ok = true;
  std::string detail;
  const Functional fx3 = Functional::from_spec("x3");
  const std::vector<double> scales = dyadic_scales(kT, 3, 8);
  for (const double hurst : {0.4, 0.5}) {
    for (const std::uint64_t seed : {std::uint64_t{7}, std::uint64_t{42}}) {
      const SampledPath p = generate_fbm(1, hurst, kT, kGrid, seed);
      const double nu = holder_estimate(p).exponent;
      const auto samples = remainder_samples(fx3, p, scales, 128, 777);
      const ExponentFit fit = remainder_exponent_fit(samples);
      const double bound = nu * (1.0 + nu) - 0.15;
      const bool here = !fit.all_below_floor && fit.exponent >= bound;
      ok = ok && here;
      if (!detail.empty()) detail += "; ";
      detail += "H=" + fmt(hurst) + " seed=" + std::to_string(seed) + " nu=" + fmt(nu) +
                " exponent=" + fmt(fit.exponent) + " bound=" + fmt(bound);
    }
  }
  // First-order remainders of the identity vanish on a straight line, which
  // must surface as the infinite-exponent flag rather than a bogus fit.
  const SampledPath lin = linear_path(1u << 14);
  const auto lin_samples =
      remainder_samples(Functional::from_spec("x"), lin, dyadic_scales(kT, 3, 7), 64, 777);
  const ExponentFit lin_fit = remainder_exponent_fit(lin_samples);
  ok = ok && lin_fit.all_below_floor;
  criterion(7, "remainder scaling exponents clear the regularity bound", ok);
  note(detail + "; linear path flagged=" + (lin_fit.all_below_floor ? "yes" : "no"));
}

void c8_decomposition(const SampledPath& w, const PartitionSequence& seq) {
  bool ok = true;
  std::string detail;
  for (const char* spec : {"x2", "x3"}) {
    const Decomposition d = rough_smooth_decompose(Functional::from_spec(spec), w, seq);
    const double ratio = d.levels.empty() ? 1.0 : d.levels.back().qv_ratio;
    ok = ok && !d.levels.empty() && d.levels.back().n == 16 && ratio < 1e-3;
    if (!detail.empty()) detail += "; ";
    detail += std::string(spec) + " qv_ratio(16)=" + fmt(ratio);
  }
  const Decomposition ident = rough_smooth_decompose(Functional::from_spec("x"), w, seq);
  bool exact = !ident.levels.empty();
  for (const DecompositionLevel& level : ident.levels) exact = exact && level.qv_ratio == 0.0;
  ok = ok && exact;
  criterion(8, "transformed paths split into a rough part plus a vanishing-variation defect", ok);
  note(detail + std::string("; identity defect exactly zero=") + (exact ? "yes" : "no"));
}

void c9_ito_mc() {
  const ItoMcResult r = ito_isometry_mc(Functional::from_spec("x2"), 200, 1000, 14, 1u << 14, kT);
  const double gap = std::abs(r.mean_lhs - r.mean_rhs);
  const bool ok = gap <= 2.0 * r.se_combined;
  criterion(9, "Monte Carlo second moments of the integral match the gradient energy", ok);
  note("mean_lhs=" + fmt(r.mean_lhs) + " mean_rhs=" + fmt(r.mean_rhs) + " gap=" + fmt(gap) +
       " 2*se=" + fmt(2.0 * r.se_combined) + " seeds=" + std::to_string(r.seeds));
}

void c10_derivative_oracles() {
  const SampledPath p = generate_brownian(1, kT, 1u << 14, 9);
  const std::uint64_t key = rng::stream_key(4242, 0);
  std::uint64_t ctr = 0;
  bool ok = true;
  std::string bad;
  const std::vector<std::string> names = {"x",         "x2",           "x3",          "tx",
                                          "sin_x",     "runint_x",     "runint_x2",   "runint_sin_x",
                                          "x_runint_x", "sin_of_x2",   "exp_of_x"};
  for (const std::string& name : names) {
    const Functional f = Functional::from_spec(name);
    bool agree = true;
    for (int i = 0; i < 64; ++i) {
      const std::size_t k = 8 + rng::below(key, ctr++, p.grid() - 16);
      const double t = p.time(k);
      const double g = vertical_grad(f, p, t)[0];
      const double fdg = fd_vertical(f, p, t)[0];
      agree = agree && std::abs(g - fdg) <= 1e-6 * (1.0 + std::abs(g));
      const double h = horizontal_deriv(f, p, t);
      const double fdh = fd_horizontal(f, p, t);
      agree = agree && std::abs(h - fdh) <= 1e-6 * (1.0 + std::abs(h));
    }

    // Order of the difference quotients under step halving, on the frozen
    // state: central should quarter its error, forward should halve it.
    // Errors at rounding level carry no order information and are exempt.
    const Evaluator ev(f, p);
    std::vector<double> central_ratios, forward_ratios;
    for (int i = 0; i < 8; ++i) {
      const std::size_t k = 8 + rng::below(key, ctr++, p.grid() - 16);
      const double g = vertical_grad(f, p, p.time(k))[0];
      const double floor = 1e-9 * (1.0 + std::abs(g));
      const double base = p.value(k, 0);
      const auto central_err = [&](double h) {
        const double up = base + h, dn = base - h;
        return std::abs((ev.value_with_state(k, &up) - ev.value_with_state(k, &dn)) / (2.0 * h) - g);
      };
      const auto forward_err = [&](double h) {
        const double up = base + h;
        return std::abs((ev.value_with_state(k, &up) - ev.value(k)) / h - g);
      };
      const double c1 = central_err(1e-3), c2 = central_err(5e-4);
      if (c1 >= floor && c2 >= floor) central_ratios.push_back(c1 / c2);
      const double f1 = forward_err(1e-3), f2 = forward_err(5e-4);
      if (f1 >= floor && f2 >= floor) forward_ratios.push_back(f1 / f2);
    }
    bool orders = true;
    if (!central_ratios.empty()) {
      const double m = median(central_ratios);
      orders = orders && m >= 3.2 && m <= 4.8;
    }
    if (!forward_ratios.empty()) {
      const double m = median(forward_ratios);
      orders = orders && m >= 1.6 && m <= 2.4;
    }
    if (!(agree && orders)) {
      ok = false;
      if (!bad.empty()) bad += ", ";
      bad += name + (agree ? "" : " [agreement]") + (orders ? "" : " [order]");
    }
  }
  criterion(10, "analytic derivatives agree with finite differences at the expected orders", ok);
  note(ok ? "all builtin functionals at 64 points each" : "failing: " + bad);
}

void c11_determinism() {
  ExperimentConfig iso;
  iso.kind = ExperimentKind::isometry;
  iso.functional = "x2";
  iso.path.seed = 7;
  iso.path.grid = 1u << 14;
  iso.partition.n_min = 4;
  iso.partition.n_max = 10;

  ExperimentConfig mc;
  mc.kind = ExperimentKind::ito_mc;
  mc.functional = "x2";
  mc.path.grid = 1u << 12;
  mc.mc.seeds = 64;
  mc.mc.seed0 = 500;
  mc.mc.level = 8;

  bool ok = true;
  for (const ExperimentConfig& config : {iso, mc}) {
    const ConvergenceReport a = run_experiment(config);
    const ConvergenceReport b = run_experiment(config);
    ok = ok && report_to_json(a, false) == report_to_json(b, false) &&
         report_to_csv(a) == report_to_csv(b) && a.inputs_hash == b.inputs_hash;
  }
  criterion(11, "identical configs reproduce identical report bytes", ok);
  note(ok ? "isometry and Monte Carlo runs byte-stable" : "re-run bytes diverged");
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  const SampledPath w = generate_brownian(1, kT, kGrid, 42);
  const PartitionSequence seq = dyadic_sequence(kGrid, kT, 6, 16);

  c1_exact_identities(w, seq);
  c2_qv_target(w, seq);
  c3_isometry_dyadic(w, seq);
  c4_isometry_lebesgue();
  c5_lebesgue_counts(w);
  c6_uniqueness(w, seq);
  c7_remainder_exponent();
  c8_decomposition(w, seq);
  c9_ito_mc();
  c10_derivative_oracles();
  c11_determinism();

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d of 11 criteria passed (%.1fs)\n", 11 - g_failed, secs);
  return g_failed == 0 ? 0 : 1;
}
