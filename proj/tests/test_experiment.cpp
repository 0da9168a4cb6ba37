#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "fqv/errors.hpp"
#include "fqv/experiment.hpp"
#include "json.hpp"

using namespace fqv;
using nlohmann::json;

namespace {

ExperimentConfig small_config(ExperimentKind kind, const std::string& functional) {
  ExperimentConfig config;
  config.kind = kind;
  config.functional = functional;
  config.path.grid = 1 << 12;
  config.path.seed = 42;
  config.partition.n_min = 4;
  config.partition.n_max = 8;
  return config;
}

}  // namespace

// ===========================================================================
// Specs and configs
// ===========================================================================

TEST_CASE("path mini-specs parse keys, aliases, and bare constants") {
  const PathSpec b = path_spec_from_string("brownian:seed=7,grid=4096,horizon=2.5,dim=2");
  CHECK(b.kind == "brownian");
  CHECK(b.seed == 7);
  CHECK(b.grid == 4096);
  CHECK(b.horizon == 2.5);
  CHECK(b.dim == 2);

  const PathSpec f = path_spec_from_string("fbm:H=0.4,seed=9");
  CHECK(f.hurst == 0.4);

  const PathSpec c = path_spec_from_string("constant:3.0");
  CHECK(c.kind == "constant");
  CHECK(c.level == 3.0);

  CHECK(path_spec_from_string("linear").kind == "linear");
  CHECK(path_spec_from_string("sine:freq=2").frequency == 2.0);
}

TEST_CASE("path spec errors carry field paths") {
  CHECK_THROWS_AS(path_spec_from_string("levy"), ConfigError);
  try {
    path_spec_from_string("brownian:sed=7");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.where() == "path.sed");
  }
  CHECK_THROWS_AS(path_spec_from_string("brownian:seed=abc"), ConfigError);
  CHECK_THROWS_AS(path_spec_from_string("linear:1.5"), ConfigError);
}

TEST_CASE("experiment kinds round trip through their names") {
  for (ExperimentKind kind :
       {ExperimentKind::qv, ExperimentKind::isometry, ExperimentKind::isometry_lebesgue,
        ExperimentKind::uniqueness, ExperimentKind::change_of_variable, ExperimentKind::remainder,
        ExperimentKind::expansion, ExperimentKind::decomposition, ExperimentKind::ito_mc,
        ExperimentKind::assumptions}) {
    CHECK(experiment_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(experiment_kind_from_string("qvx"), ConfigError);
}

TEST_CASE("config json round-trips through its canonical dump") {
  ExperimentConfig config = small_config(ExperimentKind::isometry, "x2");
  config.tolerances["rel_gap_max"] = 0.2;
  const std::string text = config_to_json_text(config);
  const ExperimentConfig back = config_from_json_text(text);
  CHECK(config_to_json_text(back) == text);
  CHECK(back.kind == ExperimentKind::isometry);
  CHECK(back.path.grid == config.path.grid);
  CHECK(back.tolerances.at("rel_gap_max") == 0.2);
}

TEST_CASE("config errors name the offending field") {
  CHECK_THROWS_AS(config_from_json_text("{"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text("[]"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text("{\"path\":{}}"), ConfigError);  // missing kind
  try {
    config_from_json_text("{\"kind\":\"qv\",\"tolerances\":{\"a\":\"b\"}}");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.where() == "tolerances.a");
  }
}

TEST_CASE("rate fits require enough informative levels") {
  CHECK_FALSE(fit_rate({{0.5, 0.1}, {0.25, 0.05}}).present);
  CHECK_FALSE(fit_rate({{0.5, 0.0}, {0.25, 0.0}, {0.125, 0.0}, {0.0625, 0.0}}).present);
  const RateFit fit = fit_rate({{0.5, 0.25}, {0.25, 0.0625}, {0.125, 0.015625}});
  CHECK(fit.present);
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-12));
}

// ===========================================================================
// Experiment runs
// ===========================================================================

TEST_CASE("constant paths have zero qv at every level") {
  ExperimentConfig config = small_config(ExperimentKind::qv, "x");
  config.path = path_spec_from_string("constant:3.0");
  config.path.grid = 1 << 12;
  config.partition.n_min = 4;
  config.partition.n_max = 8;
  const ConvergenceReport report = run_experiment(config);
  REQUIRE(report.rows.size() == 5);
  for (const LevelRow& row : report.rows) CHECK(row.qv_T == 0.0);
  CHECK(report.pass);
}

TEST_CASE("identity isometry passes its default checks with zero gap") {
  const ConvergenceReport report = run_experiment(small_config(ExperimentKind::isometry, "x"));
  CHECK(report.pass);
  CHECK(report.rows.back().rel_gap <= 1e-12);
  REQUIRE(report.checks.size() == 2);
  CHECK(report.checks[0].first == "rel_gap_final");
  CHECK(report.checks[0].second);
}

TEST_CASE("lebesgue isometry on a constant path flags the stuck mesh") {
  ExperimentConfig config = small_config(ExperimentKind::isometry_lebesgue, "x2");
  config.path = path_spec_from_string("constant:1.0");
  config.path.grid = 1 << 12;
  const ConvergenceReport report = run_experiment(config);
  REQUIRE(!report.rows.empty());
  bool flagged = false;
  for (const std::string& flag : report.flags) flagged = flagged || flag == "mesh non-vanishing";
  CHECK(flagged);
  CHECK(report.checks.empty());
  CHECK(report.pass);
}

TEST_CASE("cylindrical functionals make both integral variants coincide") {
  const ConvergenceReport report = run_experiment(small_config(ExperimentKind::uniqueness, "x2"));
  CHECK(report.pass);
  for (const LevelRow& row : report.rows) {
    CHECK(row.value_along_approx == row.value_along_path);
    CHECK(row.gap == 0.0);
  }
}

TEST_CASE("linear paths produce the infinite remainder exponent flag") {
  ExperimentConfig config = small_config(ExperimentKind::remainder, "x");
  config.path = path_spec_from_string("linear");
  config.path.grid = 1 << 12;
  config.scales.j_min = 3;
  config.scales.j_max = 7;
  const ConvergenceReport report = run_experiment(config);
  CHECK(report.pass);
  bool flagged = false;
  for (const std::string& flag : report.flags)
    flagged = flagged || flag.find("exponent infinite") != std::string::npos;
  CHECK(flagged);
  CHECK(report.checks.empty());
}

TEST_CASE("reports embed oscillation ladders for every kind") {
  ExperimentConfig mc = small_config(ExperimentKind::ito_mc, "x");
  mc.mc.seeds = 50;
  mc.mc.level = 4;
  const ConvergenceReport report = run_experiment(mc);
  CHECK_FALSE(report.osc_ladder.empty());
  CHECK_FALSE(report.foscill_ladder.empty());
  const json parsed = json::parse(report_to_json(report, false));
  CHECK(parsed.contains("osc_ladder"));
  CHECK(parsed.contains("foscill_ladder"));
  CHECK(parsed.at("osc_ladder").size() == report.osc_ladder.size());
}

TEST_CASE("experiment validation surfaces as config errors") {
  ExperimentConfig bad = small_config(ExperimentKind::qv, "x");
  bad.partition.n_max = 13;  // 2^13 does not divide 2^12
  CHECK_THROWS_AS(run_experiment(bad), ConfigError);

  ExperimentConfig leb = small_config(ExperimentKind::isometry_lebesgue, "x");
  leb.partition.kind = PartitionKind::lebesgue;
  leb.partition.n_max = 15;
  CHECK_THROWS_AS(run_experiment(leb), ConfigError);

  ExperimentConfig swapped = small_config(ExperimentKind::qv, "x");
  swapped.partition.n_min = 9;
  swapped.partition.n_max = 4;
  CHECK_THROWS_AS(run_experiment(swapped), ConfigError);
}

// ===========================================================================
// Serialization
// ===========================================================================

TEST_CASE("re-running a config reproduces report bytes modulo timestamp") {
  const ExperimentConfig config = small_config(ExperimentKind::isometry, "x2");
  const ConvergenceReport a = run_experiment(config);
  const ConvergenceReport b = run_experiment(config);
  CHECK(report_to_json(a, false) == report_to_json(b, false));
  CHECK(report_to_csv(a) == report_to_csv(b));
  CHECK(a.inputs_hash == b.inputs_hash);
}

TEST_CASE("csv uses the fixed column schema with empty cells for absent values") {
  const ConvergenceReport report = run_experiment(small_config(ExperimentKind::qv, "x"));
  const std::string csv = report_to_csv(report);
  CHECK(csv.rfind("n,mesh,osc,lhs,rhs,gap,value_along_approx,value_along_path,qv_T,residual\n",
                  0) == 0);
  // qv rows populate n, mesh, osc, qv_T and leave the rest empty.
  const std::string first_row = csv.substr(csv.find('\n') + 1);
  CHECK(first_row.find(",,,,,,") != std::string::npos);
}

TEST_CASE("report json carries config echo, hash, and passing checks") {
  ExperimentConfig config = small_config(ExperimentKind::isometry, "x2");
  const ConvergenceReport report = run_experiment(config);
  const json parsed = json::parse(report_to_json(report, true));
  CHECK(parsed.at("kind") == "isometry");
  CHECK(parsed.at("config").at("path").at("seed") == 42);
  CHECK(parsed.at("inputs_hash").get<std::string>().size() == 40);
  CHECK(parsed.contains("timestamp"));
  CHECK_FALSE(json::parse(report_to_json(report, false)).contains("timestamp"));
  const std::string stamp = parsed.at("timestamp").get<std::string>();
  REQUIRE(stamp.size() == 20);
  CHECK(stamp[4] == '-');
  CHECK(stamp[10] == 'T');
  CHECK(stamp[19] == 'Z');

  ExperimentConfig other = config;
  other.functional = "x3";
  CHECK(run_experiment(other).inputs_hash != report.inputs_hash);
}
