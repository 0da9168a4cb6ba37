// fqv: generate paths, build partition ladders, run convergence experiments,
// and export reports (JSON + per-level CSV) with a hashed output manifest.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fqv/calculus.hpp"
#include "fqv/errors.hpp"
#include "fqv/experiment.hpp"
#include "fqv/hash.hpp"
#include "fqv/partition.hpp"
#include "fqv/path.hpp"
#include "fqv/serialize.hpp"
#include "fqv/version.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ===========================================================================
// Option plumbing
// ===========================================================================

struct Opts {
  std::string config_file;
  std::string out_dir = "fqv_out";
  std::string path_spec;
  std::string functional;
  std::string dyadic;
  std::string lebesgue;
  std::uint64_t seed = 0;
  std::uint64_t grid = 0;
  double horizon = 0.0;
  std::vector<std::string> tols;
  bool expansion = false;
  CLI::App* sub = nullptr;
};

void add_path_flags(CLI::App* sub, Opts& o) {
  sub->add_option("--config", o.config_file, "JSON config file; flags override its values");
  sub->add_option("--out", o.out_dir, "output directory (default fqv_out)");
  sub->add_option("--path", o.path_spec,
                  "path mini-spec: kind[:key=value,...], kinds brownian|fbm|constant|linear|sine");
  sub->add_option("--seed", o.seed, "path seed override");
  sub->add_option("--grid", o.grid, "grid size override (samples per horizon)");
  sub->add_option("--horizon", o.horizon, "time horizon override");
  o.sub = sub;
}

void add_experiment_flags(CLI::App* sub, Opts& o) {
  add_path_flags(sub, o);
  sub->add_option("--functional", o.functional, "functional mini-spec: a short name or JSON");
  sub->add_option("--dyadic", o.dyadic, "dyadic ladder range A:B");
  sub->add_option("--lebesgue", o.lebesgue, "hitting ladder range A:B[:base]");
  sub->add_option("--tol", o.tols, "tolerance override NAME=VAL (repeatable)")
      ->take_all();
}

std::pair<int, int> parse_range(const std::string& text, const std::string& flag, double* base) {
  std::stringstream ss(text);
  std::string a, b, c;
  if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':'))
    throw fqv::ConfigError(flag, "expected A:B, got: " + text);
  const bool has_base = static_cast<bool>(std::getline(ss, c, ':'));
  try {
    if (has_base && base != nullptr) *base = std::stod(c);
    return {std::stoi(a), std::stoi(b)};
  } catch (const std::exception&) {
    throw fqv::ConfigError(flag, "expected integers A:B, got: " + text);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fqv::ConfigError("--config", "cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Flag layering: config file first, mini-specs next, scalar overrides last.
// Option count that tolerates flags a subcommand does not carry.
std::size_t count_of(const CLI::App* sub, const std::string& name) {
  const CLI::Option* opt = sub->get_option_no_throw(name);
  return opt ? opt->count() : 0u;
}

fqv::ExperimentConfig assemble(const Opts& o, std::optional<fqv::ExperimentKind> kind) {
  fqv::ExperimentConfig config;
  if (!o.config_file.empty()) config = fqv::config_from_json_text(read_file(o.config_file));
  if (kind.has_value()) config.kind = *kind;
  if (count_of(o.sub, "--path") != 0u) config.path = fqv::path_spec_from_string(o.path_spec);
  if (count_of(o.sub, "--seed") != 0u) config.path.seed = o.seed;
  if (count_of(o.sub, "--grid") != 0u) config.path.grid = static_cast<std::size_t>(o.grid);
  if (count_of(o.sub, "--horizon") != 0u) config.path.horizon = o.horizon;
  if (count_of(o.sub, "--functional") != 0u) config.functional = o.functional;
  if (count_of(o.sub, "--dyadic") != 0u) {
    config.partition.kind = fqv::PartitionKind::dyadic;
    std::tie(config.partition.n_min, config.partition.n_max) =
        parse_range(o.dyadic, "--dyadic", nullptr);
  }
  if (count_of(o.sub, "--lebesgue") != 0u) {
    config.partition.kind = fqv::PartitionKind::lebesgue;
    std::tie(config.partition.n_min, config.partition.n_max) =
        parse_range(o.lebesgue, "--lebesgue", &config.partition.level_base);
  }
  for (const std::string& tol : o.tols) {
    const auto eq = tol.find('=');
    if (eq == std::string::npos) throw fqv::ConfigError("--tol", "expected NAME=VAL, got: " + tol);
    try {
      config.tolerances[tol.substr(0, eq)] = std::stod(tol.substr(eq + 1));
    } catch (const std::exception&) {
      throw fqv::ConfigError("--tol", "expected a number after '=', got: " + tol);
    }
  }
  return config;
}

// The hitting ladder defaults to the small canonical window when nothing
// chose a range: level counts grow like base^(2n).
void default_lebesgue_range(fqv::ExperimentConfig& config, const Opts& o) {
  config.partition.kind = fqv::PartitionKind::lebesgue;
  if (o.config_file.empty() && count_of(o.sub, "--dyadic") == 0u &&
      count_of(o.sub, "--lebesgue") == 0u) {
    config.partition.n_min = 4;
    config.partition.n_max = 9;
  }
}

// ===========================================================================
// Output emission
// ===========================================================================

struct OutputFile {
  std::string name;
  std::string content;
  std::string hash;  // content hash recorded in the manifest
};

void emit(const std::string& command, const std::string& out_dir, const std::string& inputs_hash,
          std::vector<OutputFile> files) {
  fs::create_directories(out_dir);
  std::sort(files.begin(), files.end(),
            [](const OutputFile& a, const OutputFile& b) { return a.name < b.name; });
  json manifest;
  manifest["command"] = command;
  manifest["inputs_hash"] = inputs_hash;
  manifest["version"] = fqv::version();
  json listed = json::array();
  for (const OutputFile& file : files) {
    listed.push_back(json{{"name", file.name},
                          {"hash", file.hash.empty() ? fqv::content_hash(file.content) : file.hash},
                          {"bytes", file.content.size()}});
  }
  manifest["files"] = listed;
  files.push_back({"manifest.json", manifest.dump(2) + "\n", ""});
  for (const OutputFile& file : files) {
    std::ofstream out(fs::path(out_dir) / file.name, std::ios::binary);
    out << file.content;
    if (!out) throw fqv::ConfigError("--out", "cannot write " + file.name + " under " + out_dir);
    std::cout << "wrote " << (fs::path(out_dir) / file.name).string() << "\n";
  }
}

int emit_report(const std::string& command, const fqv::ConvergenceReport& report,
                const std::string& out_dir, std::vector<OutputFile> extras) {
  std::cout << "kind: " << fqv::to_string(report.kind) << "\n"
            << "path: " << report.path_label << "\n"
            << "functional: " << report.functional_desc << "\n";
  for (const auto& [name, ok] : report.checks)
    std::cout << "check " << name << ": " << (ok ? "PASS" : "FAIL") << "\n";
  for (const std::string& flag : report.flags) std::cout << "flag: " << flag << "\n";

  std::vector<OutputFile> files = std::move(extras);
  // The report's manifest hash ignores the timestamp so re-runs agree.
  files.push_back({"report.json", fqv::report_to_json(report, true),
                   fqv::content_hash(fqv::report_to_json(report, false))});
  files.push_back({"report.csv", fqv::report_to_csv(report), ""});
  emit(command, out_dir, report.inputs_hash, std::move(files));
  std::cout << "result: " << (report.pass ? "PASS" : "FAIL") << "\n";
  return report.pass ? 0 : 1;
}

int run_kind(const std::string& command, const fqv::ExperimentConfig& config,
             const std::string& out_dir) {
  const fqv::ConvergenceReport report = fqv::run_experiment(config);
  std::vector<OutputFile> extras;
  if (config.partition.kind == fqv::PartitionKind::lebesgue ||
      config.kind == fqv::ExperimentKind::isometry_lebesgue) {
    std::ostringstream csv;
    csv << "n,m,mesh,scaled_count\n";
    for (const fqv::LevelRow& row : report.rows) {
      if (!std::isfinite(row.scaled_count)) continue;
      csv << row.n << ',' << row.cells << ',' << fqv::format_double(row.mesh) << ','
          << fqv::format_double(row.scaled_count) << '\n';
    }
    extras.push_back({"lebesgue_counts.csv", csv.str(), ""});
  }
  return emit_report(command, report, out_dir, std::move(extras));
}

// ===========================================================================
// generate / partition (no experiment behind them)
// ===========================================================================

int run_generate(const Opts& o) {
  const fqv::ExperimentConfig config = assemble(o, fqv::ExperimentKind::qv);
  const fqv::SampledPath path = fqv::build_path(config.path);
  std::ostringstream csv;
  fqv::write_path_csv(csv, path);
  std::ostringstream fqvp;
  fqv::write_fqvp(fqvp, path);
  std::cout << "path: " << path.label() << "\n";
  const std::string spec_text = fqv::path_spec_to_string(config.path);
  emit("generate", o.out_dir, fqv::content_hash(spec_text),
       {{"path.csv", csv.str(), ""}, {"path.fqvp", fqvp.str(), ""}});
  return 0;
}

int run_partition(const Opts& o) {
  fqv::ExperimentConfig config = assemble(o, fqv::ExperimentKind::qv);
  if (config.partition.kind == fqv::PartitionKind::lebesgue) default_lebesgue_range(config, o);
  const fqv::SampledPath path = fqv::build_path(config.path);
  const fqv::PartitionSequence seq =
      config.partition.kind == fqv::PartitionKind::lebesgue
          ? fqv::lebesgue_sequence(path, config.partition.n_min, config.partition.n_max,
                                   config.partition.level_base)
          : fqv::dyadic_sequence(path.grid(), path.horizon(), config.partition.n_min,
                                 config.partition.n_max);
  std::ostringstream csv;
  csv << "n,cells,mesh,osc\n";
  for (const auto& [n, partition] : seq.levels) {
    csv << n << ',' << partition.cells() << ',' << fqv::format_double(fqv::mesh(partition)) << ','
        << fqv::format_double(fqv::oscillation(path, partition)) << '\n';
  }
  std::ostringstream points;
  fqv::write_partition_csv(points, seq);
  const std::string spec_text = fqv::path_spec_to_string(config.path) + "|" +
                                fqv::to_string(config.partition.kind) + ":" +
                                std::to_string(config.partition.n_min) + ":" +
                                std::to_string(config.partition.n_max);
  emit("partition", o.out_dir, fqv::content_hash(spec_text),
       {{"partition_points.csv", points.str(), ""}, {"partitions.csv", csv.str(), ""}});
  return 0;
}

// ===========================================================================
// Suggestions for near-miss tokens
// ===========================================================================

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

// Candidates are subcommand names plus the long flags in scope.  Only the
// subcommand slot and dash-prefixed tokens are eligible; option values are not.
void suggest(const CLI::App& app, int argc, char** argv) {
  std::vector<std::string> candidates;
  for (const CLI::App* sub : app.get_subcommands(nullptr)) candidates.push_back(sub->get_name());
  const CLI::App* scope = &app;
  if (const auto parsed = app.get_subcommands(); !parsed.empty()) scope = parsed.front();
  for (const CLI::Option* opt : scope->get_options())
    for (const std::string& name : opt->get_lnames()) candidates.push_back("--" + name);

  std::string best;
  std::size_t best_d = std::string::npos;
  for (int i = 1; i < argc; ++i) {
    const std::string token = argv[i];
    if (token.empty() || (i > 1 && token.front() != '-')) continue;
    std::string trimmed = token;
    while (!trimmed.empty() && trimmed.front() == '-') trimmed.erase(trimmed.begin());
    const std::size_t eq = trimmed.find('=');
    if (eq != std::string::npos) trimmed.erase(eq);
    if (trimmed.empty()) continue;
    for (const std::string& cand : candidates) {
      std::string bare = cand;
      while (!bare.empty() && bare.front() == '-') bare.erase(bare.begin());
      const std::size_t d = edit_distance(trimmed, bare);
      if (d == 0) continue;  // the token itself is valid, the error lies elsewhere
      if (d > std::max<std::size_t>(2, trimmed.size() / 3)) continue;
      if (d < best_d || (d == best_d && cand.size() < best.size())) {
        best_d = d;
        best = cand;
      }
    }
  }
  if (!best.empty()) std::cerr << "did you mean '" << best << "'?\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pathwise functional calculus lab: quadratic variation, pathwise integrals,\n"
               "an isometry for functionals of irregular paths, and supporting experiments."};
  app.name("fqv");
  app.set_version_flag("--version", fqv::version());
  app.require_subcommand(1);

  Opts generate_o, partition_o, qv_o, integrate_o, isometry_o, lebesgue_o, uniqueness_o,
      remainder_o, decompose_o, itomc_o, assumptions_o, report_o;

  add_path_flags(app.add_subcommand("generate", "Sample a path and write it as CSV"), generate_o);

  {
    CLI::App* sub = app.add_subcommand("partition", "Build a partition ladder, write per-level stats");
    add_path_flags(sub, partition_o);
    sub->add_option("--dyadic", partition_o.dyadic, "dyadic ladder range A:B");
    sub->add_option("--lebesgue", partition_o.lebesgue, "hitting ladder range A:B[:base]");
  }

  add_experiment_flags(app.add_subcommand("qv", "Quadratic variation along a partition ladder"),
                       qv_o);
  add_experiment_flags(
      app.add_subcommand("integrate",
                         "Pathwise integral via the change-of-variable identity (per-level residuals)"),
      integrate_o);
  add_experiment_flags(
      app.add_subcommand("isometry",
                         "Quadratic variation of the functional vs the integrated squared gradient"),
      isometry_o);
  {
    CLI::App* sub = app.add_subcommand(
        "lebesgue", "Hitting-time partitions: level counts, mesh, and scaled counts");
    add_experiment_flags(sub, lebesgue_o);
    sub->add_option("--levels", lebesgue_o.lebesgue, "hitting ladder range A:B[:base] (default 4:9)");
  }
  add_experiment_flags(
      app.add_subcommand("uniqueness",
                         "Integral along the raw path vs its piecewise-constant approximation"),
      uniqueness_o);
  {
    CLI::App* sub = app.add_subcommand(
        "remainder", "Taylor-remainder scaling exponent fit across dyadic scales");
    add_experiment_flags(sub, remainder_o);
    sub->add_flag("--expansion", remainder_o.expansion,
                  "fit the second-order expansion residual instead");
  }
  add_experiment_flags(
      app.add_subcommand("decompose", "Rough-smooth decomposition of the transformed path"),
      decompose_o);
  add_experiment_flags(
      app.add_subcommand("ito-mc", "Monte Carlo check of the expected isometry over many seeds"),
      itomc_o);
  add_experiment_flags(
      app.add_subcommand("assumptions", "Sampled evidence for the regularity assumptions"),
      assumptions_o);
  {
    CLI::App* sub = app.add_subcommand("report", "Run an experiment described by a JSON config");
    add_experiment_flags(sub, report_o);
    sub->get_option("--config")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    suggest(app, argc, argv);
    return 2;
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "generate") return run_generate(generate_o);
    if (name == "partition") return run_partition(partition_o);
    if (name == "qv") {
      fqv::ExperimentConfig config = assemble(qv_o, fqv::ExperimentKind::qv);
      if (config.partition.kind == fqv::PartitionKind::lebesgue)
        default_lebesgue_range(config, qv_o);
      return run_kind(name, config, qv_o.out_dir);
    }
    if (name == "integrate")
      return run_kind(name, assemble(integrate_o, fqv::ExperimentKind::change_of_variable),
                      integrate_o.out_dir);
    if (name == "isometry") {
      fqv::ExperimentConfig config = assemble(isometry_o, fqv::ExperimentKind::isometry);
      if (config.partition.kind == fqv::PartitionKind::lebesgue) {
        config.kind = fqv::ExperimentKind::isometry_lebesgue;
        default_lebesgue_range(config, isometry_o);
      }
      return run_kind(name, config, isometry_o.out_dir);
    }
    if (name == "lebesgue") {
      fqv::ExperimentConfig config = assemble(lebesgue_o, fqv::ExperimentKind::qv);
      default_lebesgue_range(config, lebesgue_o);
      if (lebesgue_o.sub->count("--levels") != 0u)
        std::tie(config.partition.n_min, config.partition.n_max) =
            parse_range(lebesgue_o.lebesgue, "--levels", &config.partition.level_base);
      return run_kind(name, config, lebesgue_o.out_dir);
    }
    if (name == "uniqueness")
      return run_kind(name, assemble(uniqueness_o, fqv::ExperimentKind::uniqueness),
                      uniqueness_o.out_dir);
    if (name == "remainder")
      return run_kind(name,
                      assemble(remainder_o, remainder_o.expansion
                                                ? fqv::ExperimentKind::expansion
                                                : fqv::ExperimentKind::remainder),
                      remainder_o.out_dir);
    if (name == "decompose")
      return run_kind(name, assemble(decompose_o, fqv::ExperimentKind::decomposition),
                      decompose_o.out_dir);
    if (name == "ito-mc")
      return run_kind(name, assemble(itomc_o, fqv::ExperimentKind::ito_mc), itomc_o.out_dir);
    if (name == "assumptions")
      return run_kind(name, assemble(assumptions_o, fqv::ExperimentKind::assumptions),
                      assumptions_o.out_dir);
    if (name == "report") return run_kind(name, assemble(report_o, std::nullopt), report_o.out_dir);
    std::cerr << "unknown subcommand: " << name << "\n";
    return 2;
  } catch (const fqv::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const fqv::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
