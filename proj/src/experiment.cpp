#include "fqv/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <limits>
#include <optional>
#include <sstream>

#include "fqv/errors.hpp"
#include "fqv/hash.hpp"
#include "fqv/numerics.hpp"
#include "fqv/serialize.hpp"
#include "fqv/version.hpp"
#include "json.hpp"

namespace fqv {

using nlohmann::json;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

// ---- kinds ----------------------------------------------------------------

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::qv: return "qv";
    case ExperimentKind::isometry: return "isometry";
    case ExperimentKind::isometry_lebesgue: return "isometry_lebesgue";
    case ExperimentKind::uniqueness: return "uniqueness";
    case ExperimentKind::change_of_variable: return "change_of_variable";
    case ExperimentKind::remainder: return "remainder";
    case ExperimentKind::expansion: return "expansion";
    case ExperimentKind::decomposition: return "decomposition";
    case ExperimentKind::ito_mc: return "ito_mc";
    case ExperimentKind::assumptions: return "assumptions";
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  static const std::pair<const char*, ExperimentKind> table[] = {
      {"qv", ExperimentKind::qv},
      {"isometry", ExperimentKind::isometry},
      {"isometry_lebesgue", ExperimentKind::isometry_lebesgue},
      {"uniqueness", ExperimentKind::uniqueness},
      {"change_of_variable", ExperimentKind::change_of_variable},
      {"remainder", ExperimentKind::remainder},
      {"expansion", ExperimentKind::expansion},
      {"decomposition", ExperimentKind::decomposition},
      {"ito_mc", ExperimentKind::ito_mc},
      {"assumptions", ExperimentKind::assumptions},
  };
  for (const auto& [text, kind] : table)
    if (name == text) return kind;
  throw ConfigError("kind", "unknown experiment kind: " + name);
}

// ---- path specs -----------------------------------------------------------

namespace {

double parse_double(const std::string& text, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') throw ConfigError(where, "expected a number, got: " + text);
  return v;
}

std::uint64_t parse_u64(const std::string& text, const std::string& where) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (end == text.c_str() || *end != '\0')
    throw ConfigError(where, "expected a nonnegative integer, got: " + text);
  return static_cast<std::uint64_t>(v);
}

const char* const kPathKinds[] = {"brownian", "fbm", "constant", "linear", "sine"};

void validate_path_kind(const std::string& kind) {
  for (const char* k : kPathKinds)
    if (kind == k) return;
  throw ConfigError("path.kind",
                    "unknown path kind: " + kind + " (have brownian, fbm, constant, linear, sine)");
}

void apply_path_key(PathSpec& spec, const std::string& key, const std::string& value) {
  const std::string where = "path." + key;
  if (key == "seed") {
    spec.seed = parse_u64(value, where);
  } else if (key == "grid" || key == "M") {
    spec.grid = static_cast<std::size_t>(parse_u64(value, where));
  } else if (key == "horizon" || key == "T") {
    spec.horizon = parse_double(value, where);
  } else if (key == "dim" || key == "d") {
    spec.dim = static_cast<int>(parse_u64(value, where));
  } else if (key == "hurst" || key == "H") {
    spec.hurst = parse_double(value, where);
  } else if (key == "level" || key == "value") {
    spec.level = parse_double(value, where);
  } else if (key == "amplitude" || key == "amp") {
    spec.amplitude = parse_double(value, where);
  } else if (key == "frequency" || key == "freq") {
    spec.frequency = parse_double(value, where);
  } else {
    throw ConfigError(where, "unknown path parameter");
  }
}

}  // namespace

PathSpec path_spec_from_string(const std::string& text) {
  PathSpec spec;
  std::string name = text;
  std::string args;
  if (const auto colon = text.find(':'); colon != std::string::npos) {
    name = text.substr(0, colon);
    args = text.substr(colon + 1);
  }
  if (name.empty()) throw ConfigError("path", "empty path kind");
  spec.kind = name;
  validate_path_kind(spec.kind);
  std::stringstream ss(args);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      // Bare value: the constant path's level.
      if (spec.kind == "constant")
        spec.level = parse_double(item, "path.level");
      else
        throw ConfigError("path", "expected key=value, got: " + item);
    } else {
      apply_path_key(spec, item.substr(0, eq), item.substr(eq + 1));
    }
  }
  return spec;
}

std::string path_spec_to_string(const PathSpec& spec) {
  std::ostringstream os;
  os << spec.kind << ":dim=" << spec.dim << ",grid=" << spec.grid
     << ",horizon=" << format_double(spec.horizon);
  if (spec.kind == "brownian" || spec.kind == "fbm") os << ",seed=" << spec.seed;
  if (spec.kind == "fbm") os << ",hurst=" << format_double(spec.hurst);
  if (spec.kind == "constant") os << ",level=" << format_double(spec.level);
  if (spec.kind == "sine")
    os << ",amplitude=" << format_double(spec.amplitude)
       << ",frequency=" << format_double(spec.frequency);
  return os.str();
}

SampledPath build_path(const PathSpec& spec) {
  validate_path_kind(spec.kind);
  if (spec.kind == "brownian") return generate_brownian(spec.dim, spec.horizon, spec.grid, spec.seed);
  if (spec.kind == "fbm") return generate_fbm(spec.dim, spec.hurst, spec.horizon, spec.grid, spec.seed);
  if (spec.kind == "constant") return generate_constant(spec.dim, spec.horizon, spec.grid, spec.level);
  SmoothSpec smooth;
  if (spec.kind == "linear") {
    SmoothTerm term;
    term.shape = SmoothTerm::Shape::power;
    term.amplitude = 1.0;
    term.degree = 1.0;
    smooth.per_coord = {{term}};
  } else {  // sine
    SmoothTerm term;
    term.shape = SmoothTerm::Shape::sine;
    term.amplitude = spec.amplitude;
    term.frequency = spec.frequency;
    smooth.per_coord = {{term}};
  }
  return generate_smooth(spec.dim, spec.horizon, spec.grid, smooth);
}

// ---- config JSON ----------------------------------------------------------

namespace {

PathSpec path_spec_from_json(const json& j) {
  if (j.is_string()) return path_spec_from_string(j.get<std::string>());
  if (!j.is_object()) throw ConfigError("path", "expected a mini-spec string or an object");
  PathSpec spec;
  if (j.contains("kind")) spec.kind = j.at("kind").get<std::string>();
  validate_path_kind(spec.kind);
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") continue;
    std::ostringstream os;
    if (value.is_string())
      os << value.get<std::string>();
    else
      os << value.dump();
    apply_path_key(spec, key, os.str());
  }
  return spec;
}

json path_spec_to_json(const PathSpec& spec) {
  return json{{"kind", spec.kind},     {"dim", spec.dim},
              {"grid", spec.grid},     {"horizon", spec.horizon},
              {"seed", spec.seed},     {"hurst", spec.hurst},
              {"level", spec.level},   {"amplitude", spec.amplitude},
              {"frequency", spec.frequency}};
}

PartitionKind partition_kind_from_string(const std::string& name) {
  if (name == "dyadic") return PartitionKind::dyadic;
  if (name == "uniform") return PartitionKind::uniform;
  if (name == "lebesgue") return PartitionKind::lebesgue;
  throw ConfigError("partition.kind", "unknown partition kind: " + name);
}

json config_to_json(const ExperimentConfig& config) {
  json j;
  j["kind"] = to_string(config.kind);
  j["path"] = path_spec_to_json(config.path);
  j["functional"] = json::parse(Functional::from_spec(config.functional).to_json_text());
  j["partition"] = json{{"kind", to_string(config.partition.kind)},
                        {"n_min", config.partition.n_min},
                        {"n_max", config.partition.n_max},
                        {"level_base", config.partition.level_base}};
  j["scales"] = json{{"j_min", config.scales.j_min},
                     {"j_max", config.scales.j_max},
                     {"count", config.scales.count},
                     {"seed", config.scales.seed}};
  j["mc"] = json{{"seeds", config.mc.seeds}, {"seed0", config.mc.seed0}, {"level", config.mc.level}};
  j["assumption_cfg"] = json{{"pairs", config.assumption_cfg.pairs},
                             {"times_per_pair", config.assumption_cfg.times_per_pair},
                             {"horizontal_samples", config.assumption_cfg.horizontal_samples},
                             {"horizontal_h_max", config.assumption_cfg.horizontal_h_max},
                             {"seed", config.assumption_cfg.seed}};
  j["tolerances"] = json(config.tolerances);
  return j;
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  ExperimentConfig config;
  try {
    if (!j.contains("kind")) throw ConfigError("kind", "missing experiment kind");
    config.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("path")) config.path = path_spec_from_json(j.at("path"));
    if (j.contains("functional")) {
      const json& f = j.at("functional");
      config.functional = f.is_string() ? f.get<std::string>() : f.dump();
    }
    if (j.contains("partition")) {
      const json& p = j.at("partition");
      if (!p.is_object()) throw ConfigError("partition", "expected an object");
      if (p.contains("kind")) config.partition.kind = partition_kind_from_string(p.at("kind").get<std::string>());
      if (p.contains("n_min")) config.partition.n_min = p.at("n_min").get<int>();
      if (p.contains("n_max")) config.partition.n_max = p.at("n_max").get<int>();
      if (p.contains("level_base")) config.partition.level_base = p.at("level_base").get<double>();
    }
    if (j.contains("scales")) {
      const json& s = j.at("scales");
      if (!s.is_object()) throw ConfigError("scales", "expected an object");
      if (s.contains("j_min")) config.scales.j_min = s.at("j_min").get<int>();
      if (s.contains("j_max")) config.scales.j_max = s.at("j_max").get<int>();
      if (s.contains("count")) config.scales.count = s.at("count").get<int>();
      if (s.contains("seed")) config.scales.seed = s.at("seed").get<std::uint64_t>();
    }
    if (j.contains("mc")) {
      const json& m = j.at("mc");
      if (!m.is_object()) throw ConfigError("mc", "expected an object");
      if (m.contains("seeds")) config.mc.seeds = m.at("seeds").get<int>();
      if (m.contains("seed0")) config.mc.seed0 = m.at("seed0").get<std::uint64_t>();
      if (m.contains("level")) config.mc.level = m.at("level").get<int>();
    }
    if (j.contains("assumption_cfg")) {
      const json& a = j.at("assumption_cfg");
      if (!a.is_object()) throw ConfigError("assumption_cfg", "expected an object");
      if (a.contains("pairs")) config.assumption_cfg.pairs = a.at("pairs").get<int>();
      if (a.contains("times_per_pair"))
        config.assumption_cfg.times_per_pair = a.at("times_per_pair").get<int>();
      if (a.contains("horizontal_samples"))
        config.assumption_cfg.horizontal_samples = a.at("horizontal_samples").get<int>();
      if (a.contains("horizontal_h_max"))
        config.assumption_cfg.horizontal_h_max = a.at("horizontal_h_max").get<double>();
      if (a.contains("seed")) config.assumption_cfg.seed = a.at("seed").get<std::uint64_t>();
    }
    if (j.contains("tolerances")) {
      const json& t = j.at("tolerances");
      if (!t.is_object()) throw ConfigError("tolerances", "expected an object of name -> number");
      for (const auto& [key, value] : t.items()) {
        if (!value.is_number()) throw ConfigError("tolerances." + key, "expected a number");
        config.tolerances[key] = value.get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError("config", e.what());
  }
  return config;
}

std::string config_to_json_text(const ExperimentConfig& config) {
  return config_to_json(config).dump(2);
}

// ---- report scaffolding ---------------------------------------------------

LevelRow::LevelRow()
    : mesh(kNaN), osc(kNaN), foscill(kNaN), lhs(kNaN), rhs(kNaN), gap(kNaN), rel_gap(kNaN),
      value_along_approx(kNaN), value_along_path(kNaN), qv_T(kNaN), residual(kNaN),
      qv_smooth(kNaN), qv_ratio(kNaN), scaled_count(kNaN) {}

ConvergenceReport::ConvergenceReport()
    : exponent(kNaN), exponent_r2(kNaN), holder_nu(kNaN) {}

RateFit fit_rate(const std::vector<std::pair<double, double>>& mesh_gap) {
  RateFit fit;
  std::vector<double> lx, ly;
  for (const auto& [mesh, gap] : mesh_gap) {
    if (mesh > 0.0 && gap > 0.0) {
      lx.push_back(std::log(mesh));
      ly.push_back(std::log(gap));
    }
  }
  if (lx.size() < 3) {
    fit.absent_reason = "fewer than 3 levels with positive gap";
    return fit;
  }
  if (*std::max_element(lx.begin(), lx.end()) == *std::min_element(lx.begin(), lx.end())) {
    fit.absent_reason = "degenerate mesh range";
    return fit;
  }
  const LinearFit lf = linear_fit(lx, ly);
  fit.present = true;
  fit.slope = lf.slope;
  fit.r_squared = lf.r_squared;
  return fit;
}

// ---- experiment body ------------------------------------------------------

namespace {

double tol_or(const ExperimentConfig& config, const std::string& name, double fallback) {
  const auto it = config.tolerances.find(name);
  return it == config.tolerances.end() ? fallback : it->second;
}

void fill_lebesgue_counts(std::vector<LevelRow>& rows, const PartitionSequence& seq, double base) {
  for (std::size_t i = 0; i < seq.levels.size(); ++i) {
    const auto& [n, partition] = seq.levels[i];
    rows[i].cells = partition.cells();
    const double m = static_cast<double>(partition.cells());
    rows[i].scaled_count = (m - 1.0) * std::pow(base, -2.0 * n);
  }
}

PartitionSequence build_sequence(const ExperimentConfig& config, const SampledPath& path) {
  const PartitionSpec& p = config.partition;
  if (p.n_min < 0 || p.n_min > p.n_max)
    throw ConfigError("partition.n_min", "need 0 <= n_min <= n_max");
  if (p.kind == PartitionKind::lebesgue) {
    if (p.n_max > 14)
      throw ConfigError("partition.n_max",
                        "hitting ladders above level 14 are impractical; pick a coarser range");
    return lebesgue_sequence(path, p.n_min, p.n_max, p.level_base);
  }
  if (p.kind == PartitionKind::uniform)
    throw ConfigError("partition.kind", "experiments run on dyadic or lebesgue ladders");
  if (p.n_max >= 63 || (path.grid() % (std::size_t{1} << p.n_max)) != 0)
    throw ConfigError("partition.n_max", "2^n_max must divide the grid size " +
                                             std::to_string(path.grid()));
  return dyadic_sequence(path.grid(), path.horizon(), p.n_min, p.n_max);
}

// Trend guard: the final level must beat the worst of the levels at least
// three refinements earlier.  A final value at rounding level counts as
// improved; exact functionals keep every level at zero with nothing left to
// shrink.  Single-level comparisons are too noisy to gate on.
bool trend_improved(const std::vector<LevelRow>& rows, double LevelRow::*field) {
  if (rows.size() < 4) return true;
  if (rows.back().*field <= 1e-12) return true;
  double worst_early = 0.0;
  for (std::size_t i = 0; i + 3 < rows.size(); ++i)
    worst_early = std::max(worst_early, rows[i].*field);
  return rows.back().*field < worst_early;
}

void run_isometry(const ExperimentConfig& config, const Functional& f, const SampledPath& path,
                  const PartitionSequence& seq, ConvergenceReport& report) {
  const auto levels = isometry_gap(f, path, seq);
  for (const auto& lvl : levels) {
    LevelRow row;
    row.n = lvl.n;
    row.mesh = lvl.mesh;
    row.osc = lvl.osc;
    row.foscill = lvl.foscill;
    row.lhs = lvl.lhs;
    row.rhs = lvl.rhs;
    row.gap = lvl.gap;
    row.rel_gap = lvl.rel_gap;
    report.rows.push_back(row);
  }
  std::vector<std::pair<double, double>> mesh_gap;
  for (const auto& lvl : levels) mesh_gap.emplace_back(lvl.mesh, lvl.gap);
  if (mesh_gap.size() >= 4) report.fitted_rate = fit_rate(mesh_gap);
  else report.fitted_rate.absent_reason = "fewer than 4 levels";

  const bool lebesgue = config.partition.kind == PartitionKind::lebesgue;
  bool mesh_stuck = false;
  if (lebesgue) {
    fill_lebesgue_counts(report.rows, seq, config.partition.level_base);
    mesh_stuck = report.rows.back().mesh >= 0.5 * path.horizon();
    if (mesh_stuck) report.flags.push_back("mesh non-vanishing");
  }
  if (!mesh_stuck) {
    const double cap = tol_or(config, "rel_gap_max", lebesgue ? 0.15 : 0.10);
    report.checks.emplace_back("rel_gap_final", report.rows.back().rel_gap < cap);
    report.checks.emplace_back("gap_trend", trend_improved(report.rows, &LevelRow::rel_gap));
  }
}

void run_qv(const ExperimentConfig& config, const SampledPath& path, const PartitionSequence& seq,
            ConvergenceReport& report) {
  const auto levels = quadratic_variation(path, seq);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    LevelRow row;
    row.n = levels[i].n;
    const Partition& partition = seq.levels[i].second;
    row.mesh = mesh(partition);
    row.osc = oscillation(path, partition);
    double trace = 0.0;
    for (int c = 0; c < path.dim(); ++c) trace += levels[i].qv.total(c, c);
    row.qv_T = trace;
    report.rows.push_back(row);
  }
  if (config.partition.kind == PartitionKind::lebesgue)
    fill_lebesgue_counts(report.rows, seq, config.partition.level_base);
  if (config.tolerances.count("qv_target") != 0) {
    const double target = tol_or(config, "qv_target", 1.0);
    const double tol = tol_or(config, "qv_tol", 0.05);
    report.checks.emplace_back("qv_final_near_target",
                               std::abs(report.rows.back().qv_T - target) < tol);
  }
}

void run_uniqueness(const ExperimentConfig& config, const Functional& f, const SampledPath& path,
                    const PartitionSequence& seq, ConvergenceReport& report) {
  for (const auto& [n, partition] : seq.levels) {
    const auto along_approx =
        follmer_integral(f, path, partition, n, IntegralVariant::along_approx);
    const auto along_path = follmer_integral(f, path, partition, n, IntegralVariant::along_path);
    LevelRow row;
    row.n = n;
    row.mesh = mesh(partition);
    row.osc = oscillation(path, partition);
    row.value_along_approx = along_approx.value;
    row.value_along_path = along_path.value;
    row.gap = std::abs(along_approx.value - along_path.value);
    row.rel_gap = row.gap / std::max({std::abs(along_approx.value), std::abs(along_path.value), 1e-300});
    report.rows.push_back(row);
  }
  const double cap = tol_or(config, "uniqueness_rel_max", 1e-2);
  report.checks.emplace_back("uniqueness_rel_final", report.rows.back().rel_gap < cap);
}

void run_change_of_variable(const ExperimentConfig& config, const Functional& f,
                            const SampledPath& path, const PartitionSequence& seq,
                            ConvergenceReport& report) {
  for (const auto& [n, partition] : seq.levels) {
    LevelRow row;
    row.n = n;
    row.mesh = mesh(partition);
    row.osc = oscillation(path, partition);
    row.residual = change_of_variable_residual(f, path, partition);
    report.rows.push_back(row);
  }
  if (config.tolerances.count("residual_max") != 0)
    report.checks.emplace_back("residual_final",
                               report.rows.back().residual <= tol_or(config, "residual_max", 0.0));
}

void run_residual_fit(const ExperimentConfig& config, const Functional& f, const SampledPath& path,
                      bool second_order, ConvergenceReport& report) {
  const ScaleSpec& sc = config.scales;
  if (sc.j_min > sc.j_max) throw ConfigError("scales.j_min", "need j_min <= j_max");
  const auto scales = dyadic_scales(path.horizon(), sc.j_min, sc.j_max);
  const auto samples = second_order
                           ? expansion_residual_samples(f, path, scales, sc.count, sc.seed)
                           : remainder_samples(f, path, scales, sc.count, sc.seed);
  const ExponentFit fit = remainder_exponent_fit(samples);
  for (int j = sc.j_min; j <= sc.j_max; ++j) {
    LevelRow row;
    row.n = j;
    row.cells = static_cast<std::size_t>(sc.count);
    const double scale = scales[static_cast<std::size_t>(j - sc.j_min)];
    row.mesh = scale;
    double max_r = 0.0;
    for (const auto& s : samples)
      if (std::abs(s.scale - scale) < 0.25 * path.dt()) max_r = std::max(max_r, s.value);
    row.residual = max_r;
    report.rows.push_back(row);
  }
  report.exponent = fit.exponent;
  report.exponent_r2 = fit.r_squared;
  const HolderEstimate holder = holder_estimate(path);
  report.holder_nu = holder.exponent;
  if (fit.all_below_floor) {
    report.flags.push_back("exponent infinite: all residuals below floor");
    return;
  }
  const double nu = holder.exponent;
  const double slack = tol_or(config, "exponent_slack", second_order ? 0.20 : 0.15);
  const double bound = second_order ? 3.0 * nu * nu + nu - slack : nu * (1.0 + nu) - slack;
  report.checks.emplace_back(second_order ? "expansion_exponent_bound" : "remainder_exponent_bound",
                             fit.exponent >= bound);
}

void run_decomposition(const ExperimentConfig& config, const Functional& f, const SampledPath& path,
                       const PartitionSequence& seq, ConvergenceReport& report) {
  const Decomposition dec = rough_smooth_decompose(f, path, seq);
  for (std::size_t i = 0; i < dec.levels.size(); ++i) {
    const auto& lvl = dec.levels[i];
    LevelRow row;
    row.n = lvl.n;
    const Partition& partition = seq.levels[i].second;
    row.mesh = mesh(partition);
    row.osc = oscillation(path, partition);
    row.qv_T = lvl.qv_transformed;
    row.qv_smooth = lvl.qv_smooth;
    row.qv_ratio = lvl.qv_ratio;
    row.residual = lvl.qv_ratio;
    report.rows.push_back(row);
  }
  if (dec.degenerate_qv) report.flags.push_back("degenerate base QV");
  const double cap = tol_or(config, "qv_ratio_max", 1e-3);
  report.checks.emplace_back("qv_ratio_final", report.rows.back().qv_ratio < cap);
}

void run_ito_mc(const ExperimentConfig& config, const Functional& f, const SampledPath& path,
                ConvergenceReport& report) {
  const McSpec& mc = config.mc;
  report.mc = ito_isometry_mc(f, mc.seeds, mc.seed0, mc.level, path.grid(), path.horizon(),
                              path.dim());
  LevelRow row;
  row.n = mc.level;
  row.mesh = path.horizon() * std::ldexp(1.0, -mc.level);
  row.lhs = report.mc.mean_lhs;
  row.rhs = report.mc.mean_rhs;
  row.gap = std::abs(report.mc.mean_lhs - report.mc.mean_rhs);
  row.rel_gap = row.gap / std::max({std::abs(report.mc.mean_lhs), std::abs(report.mc.mean_rhs), 1e-300});
  report.rows.push_back(row);
  const double sigmas = tol_or(config, "mc_sigma", 2.0);
  report.checks.emplace_back("mc_means_within_stderr",
                             row.gap <= sigmas * report.mc.se_combined);
}

void run_assumptions(const ExperimentConfig& config, const Functional& f, const SampledPath& path,
                     const PartitionSequence& seq, ConvergenceReport& report) {
  report.assumptions = check_assumptions(f, path, seq, config.assumption_cfg);
  for (std::size_t i = 0; i < seq.levels.size(); ++i) {
    const auto& [n, partition] = seq.levels[i];
    LevelRow row;
    row.n = n;
    row.mesh = mesh(partition);
    row.osc = report.assumptions.osc[i].second;
    row.foscill = report.assumptions.foscill_max[i].second;
    report.rows.push_back(row);
  }
  report.checks.emplace_back("estimates_finite",
                             std::isfinite(report.assumptions.lipschitz_K_hat) &&
                                 std::isfinite(report.assumptions.horiz_lipschitz_C_hat));
}

void attach_ladders(ConvergenceReport& report, const Functional& f, const SampledPath& path,
                    const PartitionSequence& seq) {
  const Evaluator ev(f, path);
  for (const auto& [n, partition] : seq.levels) {
    report.osc_ladder.emplace_back(n, oscillation(path, partition));
    report.foscill_ladder.emplace_back(n, functional_oscillation(ev, partition));
  }
}

// Kinds without a partition ladder of their own still report oscillation
// evidence, taken along a small dyadic ladder compatible with the grid.
void attach_default_ladders(ConvergenceReport& report, const Functional& f,
                            const SampledPath& path) {
  int n_hi = 10;
  while (n_hi > 0 && (path.grid() % (std::size_t{1} << n_hi)) != 0) --n_hi;
  if (n_hi == 0) {
    report.flags.push_back("no dyadic ladder divides the grid");
    return;
  }
  const int n_lo = std::max(4, n_hi - 4);
  attach_ladders(report, f, path,
                 dyadic_sequence(path.grid(), path.horizon(), std::min(n_lo, n_hi), n_hi));
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ConvergenceReport run_experiment(const ExperimentConfig& config) {
  ConvergenceReport report;
  report.kind = config.kind;
  report.config = config;
  report.inputs_hash = content_hash(config_to_json_text(config));
  report.timestamp = utc_timestamp();

  const SampledPath path = build_path(config.path);
  const Functional f = Functional::from_spec(config.functional);
  report.path_label = path.label();
  report.functional_desc = f.describe();
  {
    std::ostringstream env;
    env << "{\"dim\":" << path.dim() << ",\"grid\":" << path.grid() << ",\"version\":\""
        << version() << "\"}";
    report.environment = env.str();
  }
  if (path.label().find("[psd-clipped]") != std::string::npos)
    report.flags.push_back("psd-clipped");

  ExperimentConfig effective = config;
  if (config.kind == ExperimentKind::isometry_lebesgue) {
    effective.partition.kind = PartitionKind::lebesgue;
    // The hitting ladder gets the canonical small window unless one was chosen.
    if (config.partition.kind != PartitionKind::lebesgue && config.partition.n_min == 6 &&
        config.partition.n_max == 16) {
      effective.partition.n_min = 5;
      effective.partition.n_max = 9;
    }
  }

  std::optional<PartitionSequence> seq;
  switch (config.kind) {
    case ExperimentKind::qv:
      seq = build_sequence(effective, path);
      run_qv(effective, path, *seq, report);
      break;
    case ExperimentKind::isometry:
    case ExperimentKind::isometry_lebesgue:
      seq = build_sequence(effective, path);
      run_isometry(effective, f, path, *seq, report);
      break;
    case ExperimentKind::uniqueness:
      seq = build_sequence(effective, path);
      run_uniqueness(effective, f, path, *seq, report);
      break;
    case ExperimentKind::change_of_variable:
      seq = build_sequence(effective, path);
      run_change_of_variable(effective, f, path, *seq, report);
      break;
    case ExperimentKind::remainder:
      run_residual_fit(effective, f, path, false, report);
      break;
    case ExperimentKind::expansion:
      run_residual_fit(effective, f, path, true, report);
      break;
    case ExperimentKind::decomposition:
      seq = build_sequence(effective, path);
      run_decomposition(effective, f, path, *seq, report);
      break;
    case ExperimentKind::ito_mc:
      run_ito_mc(effective, f, path, report);
      break;
    case ExperimentKind::assumptions:
      seq = build_sequence(effective, path);
      run_assumptions(effective, f, path, *seq, report);
      break;
  }

  if (config.kind == ExperimentKind::assumptions) {
    report.osc_ladder = report.assumptions.osc;
    report.foscill_ladder = report.assumptions.foscill_max;
  } else if (seq.has_value()) {
    attach_ladders(report, f, path, *seq);
  } else {
    attach_default_ladders(report, f, path);
  }

  report.pass = std::all_of(report.checks.begin(), report.checks.end(),
                            [](const auto& check) { return check.second; });
  return report;
}

// ---- serialization --------------------------------------------------------

std::string report_to_csv(const ConvergenceReport& report) {
  std::ostringstream os;
  os << "n,mesh,osc,lhs,rhs,gap,value_along_approx,value_along_path,qv_T,residual\n";
  auto cell = [&](double v) {
    os << ',';
    if (std::isfinite(v)) os << format_double(v);
  };
  for (const LevelRow& row : report.rows) {
    os << row.n;
    cell(row.mesh);
    cell(row.osc);
    cell(row.lhs);
    cell(row.rhs);
    cell(row.gap);
    cell(row.value_along_approx);
    cell(row.value_along_path);
    cell(row.qv_T);
    cell(row.residual);
    os << '\n';
  }
  return os.str();
}

std::string report_to_json(const ConvergenceReport& report, bool include_timestamp) {
  json j;
  j["kind"] = to_string(report.kind);
  j["config"] = config_to_json(report.config);
  j["path_label"] = report.path_label;
  j["functional"] = report.functional_desc;
  j["inputs_hash"] = report.inputs_hash;
  j["environment"] = json::parse(report.environment);
  if (include_timestamp) j["timestamp"] = report.timestamp;
  j["pass"] = report.pass;

  json rows = json::array();
  for (const LevelRow& row : report.rows) {
    json r;
    r["n"] = row.n;
    if (row.cells != 0) r["cells"] = row.cells;
    auto put = [&](const char* key, double v) {
      if (std::isfinite(v)) r[key] = v;
    };
    put("mesh", row.mesh);
    put("osc", row.osc);
    put("foscill_max", row.foscill);
    put("lhs", row.lhs);
    put("rhs", row.rhs);
    put("gap", row.gap);
    put("rel_gap", row.rel_gap);
    put("value_along_approx", row.value_along_approx);
    put("value_along_path", row.value_along_path);
    put("qv_T", row.qv_T);
    put("residual", row.residual);
    put("qv_smooth", row.qv_smooth);
    put("qv_ratio", row.qv_ratio);
    put("scaled_count", row.scaled_count);
    rows.push_back(r);
  }
  j["rows"] = rows;

  if (report.fitted_rate.present) {
    j["fitted_rate"] = json{{"slope", report.fitted_rate.slope},
                            {"r_squared", report.fitted_rate.r_squared}};
  } else if (!report.fitted_rate.absent_reason.empty()) {
    j["fitted_rate"] = json{{"absent_reason", report.fitted_rate.absent_reason}};
  }

  json checks = json::array();
  for (const auto& [name, ok] : report.checks) checks.push_back(json{{"name", name}, {"pass", ok}});
  j["checks"] = checks;
  j["flags"] = report.flags;

  auto ladder = [](const std::vector<std::pair<int, double>>& src) {
    json out = json::array();
    for (const auto& [n, v] : src) out.push_back(json::array({n, v}));
    return out;
  };
  j["osc_ladder"] = ladder(report.osc_ladder);
  j["foscill_ladder"] = ladder(report.foscill_ladder);

  if (std::isfinite(report.exponent)) {
    j["exponent"] = report.exponent;
    j["exponent_r2"] = report.exponent_r2;
  } else if (std::isinf(report.exponent)) {
    j["exponent_infinite"] = true;
  }
  if (std::isfinite(report.holder_nu)) j["holder_nu"] = report.holder_nu;

  if (report.kind == ExperimentKind::ito_mc) {
    j["mc"] = json{{"mean_lhs", report.mc.mean_lhs}, {"mean_rhs", report.mc.mean_rhs},
                   {"se_lhs", report.mc.se_lhs},     {"se_rhs", report.mc.se_rhs},
                   {"se_combined", report.mc.se_combined}, {"se_diff", report.mc.se_diff},
                   {"seeds", report.mc.seeds}};
  }
  if (report.kind == ExperimentKind::assumptions) {
    j["assumption_estimates"] = json{{"lipschitz_K_hat", report.assumptions.lipschitz_K_hat},
                                     {"horiz_lipschitz_C_hat", report.assumptions.horiz_lipschitz_C_hat},
                                     {"samples_used", report.assumptions.samples_used}};
  }
  return j.dump(2) + "\n";
}

}  // namespace fqv
