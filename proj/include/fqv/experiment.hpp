#pragma once

// Experiment orchestration: a config names a path, a functional, a partition
// ladder, and an experiment kind; running it produces a multi-level report
// with tolerance checks, convergence-rate fits, and flags.  Reports serialize
// to JSON (full) and to a fixed-schema per-level CSV; identical configs
// byte-reproduce both (the JSON timestamp field aside).

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fqv/calculus.hpp"
#include "fqv/functional.hpp"
#include "fqv/partition.hpp"
#include "fqv/path.hpp"

namespace fqv {

// ---- config ---------------------------------------------------------------

enum class ExperimentKind {
  qv,
  isometry,
  isometry_lebesgue,
  uniqueness,
  change_of_variable,
  remainder,
  expansion,
  decomposition,
  ito_mc,
  assumptions,
};
const char* to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

struct PathSpec {
  std::string kind = "brownian";  // brownian, fbm, constant, linear, sine
  int dim = 1;
  double horizon = 1.0;
  std::size_t grid = 1u << 20;
  std::uint64_t seed = 42;
  double hurst = 0.5;       // fbm
  double level = 0.0;       // constant
  double amplitude = 1.0;   // sine
  double frequency = 1.0;   // sine
};

// Mini-spec "name:key=value,..."; e.g. "brownian:seed=42,grid=65536",
// "fbm:hurst=0.4,seed=7", "constant:3.0", "linear", "sine:frequency=2".
PathSpec path_spec_from_string(const std::string& text);
std::string path_spec_to_string(const PathSpec& spec);
SampledPath build_path(const PathSpec& spec);

struct PartitionSpec {
  PartitionKind kind = PartitionKind::dyadic;
  int n_min = 6;
  int n_max = 16;
  double level_base = 2.0;  // lebesgue threshold base
};

struct ScaleSpec {
  int j_min = 4;
  int j_max = 10;
  int count = 32;            // samples per scale
  std::uint64_t seed = 2026; // sampling stream
};

struct McSpec {
  int seeds = 200;
  std::uint64_t seed0 = 1000;
  int level = 14;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::qv;
  PathSpec path;
  std::string functional = "x2";  // short name or JSON expression
  PartitionSpec partition;
  ScaleSpec scales;                      // remainder / expansion
  McSpec mc;                             // ito_mc
  AssumptionCheckConfig assumption_cfg;  // assumptions
  std::map<std::string, double> tolerances;
};

ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& config);

// ---- report ---------------------------------------------------------------

// One ladder entry; fields not produced by a kind stay NaN and serialize to
// empty CSV cells / omitted JSON keys.
struct LevelRow {
  int n = 0;
  std::size_t cells = 0;
  double mesh = 0.0;
  double osc = 0.0;
  double foscill = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
  double rel_gap = 0.0;
  double value_along_approx = 0.0;
  double value_along_path = 0.0;
  double qv_T = 0.0;
  double residual = 0.0;
  double qv_smooth = 0.0;
  double qv_ratio = 0.0;
  double scaled_count = 0.0;  // lebesgue: 4^-n (m - 1)
  LevelRow();                 // initializes every double field to NaN, n/cells to 0
};

struct RateFit {
  bool present = false;
  double slope = 0.0;
  double r_squared = 0.0;
  std::string absent_reason;
};

// Log-log least squares of gap against mesh over levels with positive gap.
RateFit fit_rate(const std::vector<std::pair<double, double>>& mesh_gap);

struct ConvergenceReport {
  ExperimentKind kind = ExperimentKind::qv;
  ExperimentConfig config;
  std::string path_label;
  std::string functional_desc;
  std::vector<LevelRow> rows;
  RateFit fitted_rate;
  std::vector<std::pair<std::string, bool>> checks;  // named tolerance checks, config order
  std::vector<std::string> flags;                    // e.g. "mesh non-vanishing"
  bool pass = true;

  double exponent = 0.0;     // remainder / expansion fit (NaN unless produced)
  double exponent_r2 = 0.0;
  double holder_nu = 0.0;    // path regularity estimate backing the slack

  // Oscillation evidence, embedded in every report regardless of kind.
  std::vector<std::pair<int, double>> osc_ladder;
  std::vector<std::pair<int, double>> foscill_ladder;
  ItoMcResult mc;            // ito_mc only
  AssumptionReport assumptions;  // assumptions only

  std::string inputs_hash;  // content hash of the canonical config dump
  std::string environment;  // version / grid / dim JSON fragment
  std::string timestamp;

  ConvergenceReport();
};

ConvergenceReport run_experiment(const ExperimentConfig& config);

// Fixed schema: n,mesh,osc,lhs,rhs,gap,value_along_approx,value_along_path,qv_T,residual
std::string report_to_csv(const ConvergenceReport& report);
// Full report; pass false to omit the timestamp field (byte-stable output).
std::string report_to_json(const ConvergenceReport& report, bool include_timestamp = true);

}  // namespace fqv
