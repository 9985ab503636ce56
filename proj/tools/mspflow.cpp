#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "mspflow/acceptance.hpp"
#include "mspflow/config.hpp"
#include "mspflow/errors.hpp"
#include "mspflow/experiments.hpp"
#include "mspflow/io.hpp"

namespace fs = std::filesystem;
using namespace mspflow;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct Common {
  std::string config;
  std::string out;
  std::string ref_cache;
  std::string basis_cache;
  std::string bases;
};

RunConfig load(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig() : load_config(c.config);
  if (!c.out.empty()) cfg.output.dir = c.out;
  if (!c.bases.empty()) {
    const BasisConfig b = parse_basis_label(c.bases);
    cfg.ms.offline = b.offline;
    cfg.ms.online = b.online;
    cfg.ms.full_snapshot = b.full_snapshot;
  }
  cfg.validate();
  return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.output.dir) / name).string();
}

void write_series(const std::string& path, const ErrorSeries& s) {
  std::vector<std::vector<double>> rows;
  for (size_t k = 0; k < s.t.size(); ++k) rows.push_back({s.t[k], s.e_s[k], s.flux_sign[k]});
  write_timeseries(path, {"e_s", "flux_sign"}, rows);
}

int cmd_gen_medium(const Common& c, const std::optional<double>& contrast, const std::optional<std::uint64_t>& seed,
                   const std::string& pattern, const std::string& file) {
  RunConfig cfg = load(c);
  if (contrast) cfg.medium.contrast = *contrast;
  if (seed) cfg.medium.seed = *seed;
  if (!pattern.empty()) cfg.medium.pattern = parse_pattern(pattern);
  cfg.medium.file.clear();
  const GridHierarchy grid = make_grid(cfg);
  const std::string path = file.empty() ? out_path(cfg, "medium.txt") : file;
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) ensure_writable_dir(parent.string());
  save_medium(make_medium(cfg, grid), path);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_run_fine(const Common& c) {
  const RunConfig cfg = load(c);
  ensure_writable_dir(cfg.output.dir);
  const Problem p = make_problem(cfg);
  const RunResult r = run_fine(p, cfg.time, initial_state(p, cfg.initial_saturation()));
  write_trajectory(cfg.output.dir, "fine", p.grid, p.medium, r.trajectory, cfg.output.csv, cfg.output.vtk);
  write_report(out_path(cfg, "fine_report.csv"), r.report);
  std::printf("fine: %zu steps, max conservation %.3g, bounds violations %d\n", r.report.steps.size(),
              r.report.max_conservation(), r.report.total_bounds_violations());
  return 0;
}

int cmd_run_ms(const Common& c) {
  const RunConfig cfg = load(c);
  ensure_writable_dir(cfg.output.dir);
  const Problem p = make_problem(cfg);
  MsRunOptions o;
  o.basis_cache = c.basis_cache;
  const MsRunResult r = run_ms(p, cfg.time, initial_state(p, cfg.initial_saturation()), basis_for(cfg, ""), o);
  write_trajectory(cfg.output.dir, "ms", p.grid, p.medium, r.trajectory, cfg.output.csv, cfg.output.vtk);
  write_report(out_path(cfg, "ms_report.csv"), r.report);
  std::printf("ms %s: %zu steps, %d basis functions, max conservation %.3g, bounds violations %d\n",
              cfg.ms.label().c_str(), r.report.steps.size(), r.space.size(), r.report.max_conservation(),
              r.report.total_bounds_violations());
  return 0;
}

int cmd_compare(const Common& c) {
  const RunConfig cfg = load(c);
  ensure_writable_dir(cfg.output.dir);
  const RunResult ref = reference_run(cfg, c.ref_cache);
  const CaseResult r = run_case(cfg, {cfg.ms.label(), 0, 0.0, ""}, ref.trajectory);
  const Problem p = make_problem(cfg);
  write_series(out_path(cfg, "compare.csv"), r.series);
  write_report(out_path(cfg, "ms_report.csv"), r.run.report);
  write_trajectory(cfg.output.dir, "ms", p.grid, p.medium, r.run.trajectory, cfg.output.csv, cfg.output.vtk);
  Trajectory ref_out;
  for (const State& s : ref.trajectory.states) {
    if (r.run.trajectory.at(s.t)) ref_out.states.push_back(s);
  }
  write_trajectory(cfg.output.dir, "fine", p.grid, p.medium, ref_out, cfg.output.csv, cfg.output.vtk);
  std::printf("compare %s: final e_s %.6g, flux sign %.4f\n", r.series.label.c_str(), r.series.final_error(),
              r.series.final_flux_sign());
  return 0;
}

int cmd_sweep(const Common& c, const std::string& name, const std::function<std::vector<MsCase>(const RunConfig&)>& cases) {
  const RunConfig cfg = load(c);
  ensure_writable_dir(cfg.output.dir);
  const RunResult ref = reference_run(cfg, c.ref_cache);
  std::vector<ErrorSeries> series;
  for (const MsCase& mc : cases(cfg)) {
    const CaseResult r = run_case(cfg, mc, ref.trajectory);
    std::printf("%s: final e_s %.6g\n", mc.label.c_str(), r.series.final_error());
    std::fflush(stdout);
    series.push_back(r.series);
  }
  const std::string path = out_path(cfg, name + ".csv");
  write_error_table(path, series);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_verify(const Common& c) {
  const RunConfig cfg = load(c);
  AcceptanceOptions o;
  o.out_dir = c.out;
  o.log = [](const std::string& m) { std::fprintf(stderr, "%s\n", m.c_str()); };
  int failed = 0;
  run_acceptance(cfg, o, [&](const CriterionResult& r) {
    std::printf("%s\n", format_result(r).c_str());
    std::fflush(stdout);
    failed += r.pass ? 0 : 1;
  });
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-phase flow simulator with fine-scale and multiscale mixed IMPES schemes"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "TOML run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "Output directory (overrides [output] dir)");
  };
  auto add_ref = [&](CLI::App* sub) {
    sub->add_option("--ref-cache", common.ref_cache, "Directory caching the fine reference run");
  };
  auto add_bases = [&](CLI::App* sub) {
    sub->add_option("--bases", common.bases, "Basis recipe l+k (overrides [ms] bases)");
  };

  std::optional<double> contrast;
  std::optional<std::uint64_t> seed;
  std::string pattern, medium_file;
  auto* gen = app.add_subcommand("gen-medium", "Generate a high-contrast medium file");
  add_common(gen);
  gen->add_option("--contrast", contrast, "Permeability contrast");
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--pattern", pattern, "channels | inclusions | mixed");
  gen->add_option("--file", medium_file, "Output file (default <out>/medium.txt)");

  auto* fine = app.add_subcommand("run-fine", "Fine-scale run");
  add_common(fine);
  auto* ms = app.add_subcommand("run-ms", "Multiscale run");
  add_common(ms);
  add_bases(ms);
  ms->add_option("--basis-cache", common.basis_cache, "Directory caching multiscale spaces");
  auto* compare = app.add_subcommand("compare", "Fine reference and multiscale run, e_s over time");
  add_common(compare);
  add_ref(compare);
  add_bases(compare);
  auto* sdt = app.add_subcommand("sweep-dt", "Multiscale error for each [sweep] dts");
  auto* sh = app.add_subcommand("sweep-h", "Multiscale error for each [sweep] blocks");
  auto* sb = app.add_subcommand("sweep-bases", "Multiscale error for each [sweep] bases");
  for (auto* s : {sdt, sh, sb}) {
    add_common(s);
    add_ref(s);
  }
  auto* verify = app.add_subcommand("verify", "Run the acceptance battery; nonzero exit on any failure");
  add_common(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen_medium(common, contrast, seed, pattern, medium_file);
    if (*fine) return cmd_run_fine(common);
    if (*ms) return cmd_run_ms(common);
    if (*compare) return cmd_compare(common);
    if (*sdt) return cmd_sweep(common, "sweep_dt", dt_cases);
    if (*sh) return cmd_sweep(common, "sweep_h", h_cases);
    if (*sb) return cmd_sweep(common, "sweep_bases", basis_cases);
    if (*verify) return cmd_verify(common);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const IngestionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return kExitSolver;
  }
  return 0;
}
