#include "mspflow/experiments.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mspflow/errors.hpp"
#include "mspflow/io.hpp"

namespace mspflow {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'P', 'F', 'R', 'E', 'F', '1'};

void write_vector(std::ofstream& out, const Vector& v) {
  const std::int64_t n = v.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

bool read_vector(std::ifstream& in, Vector& v) {
  std::int64_t n = 0;
  if (!in.read(reinterpret_cast<char*>(&n), sizeof n) || n < 0 || n > (1LL << 32)) return false;
  v.resize(n);
  return static_cast<bool>(in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))));
}

bool load_reference(const std::string& dir, const std::string& key, RunResult& out) {
  const std::filesystem::path base(dir);
  std::ifstream kin(base / "reference.key");
  if (!kin) return false;
  std::stringstream stored;
  stored << kin.rdbuf();
  if (stored.str() != key) return false;
  std::ifstream in(base / "reference.bin", std::ios::binary);
  char magic[8];
  if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + 8, kMagic)) return false;
  std::int64_t count = 0;
  if (!in.read(reinterpret_cast<char*>(&count), sizeof count) || count < 0) return false;
  RunResult r;
  for (std::int64_t k = 0; k < count; ++k) {
    State s;
    if (!in.read(reinterpret_cast<char*>(&s.t), sizeof s.t)) return false;
    for (Vector* v : {&s.sw, &s.sn, &s.pw, &s.pn, &s.ut, &s.xi}) {
      if (!read_vector(in, *v)) return false;
    }
    r.trajectory.states.push_back(std::move(s));
  }
  out = std::move(r);
  return true;
}

void save_reference(const std::string& dir, const std::string& key, const RunResult& run) {
  ensure_writable_dir(dir);
  const std::filesystem::path base(dir);
  {
    std::ofstream out(base / "reference.bin", std::ios::binary);
    if (!out) throw ConfigError("reference cache: cannot write " + dir);
    out.write(kMagic, sizeof kMagic);
    const std::int64_t count = static_cast<std::int64_t>(run.trajectory.states.size());
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    for (const State& s : run.trajectory.states) {
      out.write(reinterpret_cast<const char*>(&s.t), sizeof s.t);
      for (const Vector* v : {&s.sw, &s.sn, &s.pw, &s.pn, &s.ut, &s.xi}) write_vector(out, *v);
    }
  }
  // The key goes last so an interrupted write never looks valid.
  std::ofstream kout(base / "reference.key");
  kout << key;
}

TimeGrid reference_time(const RunConfig& config) {
  TimeGrid t = config.time;
  t.dt = config.sweep.reference_dt;
  t.output_every = 1;
  t.rebuild_times.clear();
  return t;
}

}  // namespace

std::string reference_key(const RunConfig& config, const Problem& problem) {
  const TimeGrid t = reference_time(config);
  std::ostringstream k;
  const FluidProps& p = problem.props;
  k << "grid " << problem.grid.nx() << ' ' << problem.grid.ny() << ' ' << format_number(problem.grid.lx()) << ' '
    << format_number(problem.grid.ly()) << '\n'
    << "fluids " << format_number(p.mu_w) << ' ' << format_number(p.mu_n) << ' ' << format_number(p.rho_w) << ' '
    << format_number(p.rho_n) << ' ' << format_number(p.s_rw) << ' ' << format_number(p.s_rn) << ' '
    << format_number(p.porosity) << ' ' << p.kr_exponent << '\n'
    << "kappa " << field_hash(problem.medium.kappa) << '\n'
    << "sources " << field_hash(problem.sources.qw) << ' ' << field_hash(problem.sources.qn) << '\n'
    << "capillary " << static_cast<int>(problem.capillary.kind) << ' '
    << format_number(problem.capillary.entry_pressure) << '\n'
    << "gravity " << problem.gravity.enabled << ' ' << format_number(problem.gravity.g) << '\n'
    << "time " << format_number(t.dt) << ' ' << format_number(t.T) << ' ' << static_cast<int>(t.substep) << ' '
    << format_number(t.cfl_safety) << '\n'
    << "initial " << format_number(config.initial_saturation()) << '\n'
    << "solver " << static_cast<int>(problem.sink) << ' ' << static_cast<int>(problem.gauge) << ' '
    << format_number(problem.solver_tol) << '\n';
  return k.str();
}

RunResult reference_run(const RunConfig& config, const std::string& cache_dir, bool monitor) {
  const Problem problem = make_problem(config);
  const std::string key = reference_key(config, problem);
  RunResult result;
  if (!cache_dir.empty() && load_reference(cache_dir, key, result)) return result;
  RunOptions options;
  options.monitor = monitor;
  result = run_fine(problem, reference_time(config), initial_state(problem, config.initial_saturation()), options);
  if (!cache_dir.empty()) save_reference(cache_dir, key, result);
  return result;
}

BasisConfig basis_for(const RunConfig& config, const std::string& label) {
  BasisConfig basis = label.empty() ? config.ms : parse_basis_label(label);
  if (!label.empty()) {
    basis.tol = config.ms.tol;
    basis.oversample_layers = config.ms.oversample_layers;
  }
  basis.solver_tol = config.solver_tol;
  return basis;
}

CaseResult run_case(const RunConfig& config, const MsCase& c, const Trajectory& reference, bool monitor) {
  const Problem problem = make_problem(config, c.block);
  TimeGrid time = config.time;
  if (c.dt > 0.0) {
    time.dt = c.dt;
    time.output_every = std::max(1, static_cast<int>(std::lround(config.time.output_every * config.time.dt / c.dt)));
  }
  const BasisConfig basis = basis_for(config, c.bases);
  MsRunOptions options;
  options.monitor = monitor;
  options.reference = &reference;
  CaseResult out;
  out.run = run_ms(problem, time, initial_state(problem, config.initial_saturation()), basis, options);
  out.series.label = c.label;
  for (const StepRecord& r : out.run.report.steps) {
    if (!r.e_s) continue;
    out.series.t.push_back(r.t);
    out.series.e_s.push_back(*r.e_s);
    out.series.flux_sign.push_back(r.flux_sign.value_or(std::nan("")));
  }
  return out;
}

std::vector<MsCase> dt_cases(const RunConfig& config) {
  std::vector<MsCase> out;
  for (const double dt : config.sweep.dts) out.push_back({"dt=" + format_number(dt), 0, dt, config.sweep.dt_bases});
  return out;
}

std::vector<MsCase> h_cases(const RunConfig& config) {
  std::vector<MsCase> out;
  for (const int b : config.sweep.blocks) out.push_back({"n=" + std::to_string(b), b, 0.0, config.sweep.h_bases});
  return out;
}

std::vector<MsCase> basis_cases(const RunConfig& config) {
  std::vector<MsCase> out;
  for (const auto& label : config.sweep.bases) out.push_back({label, 0, 0.0, label});
  return out;
}

void write_error_table(const std::string& path, const std::vector<ErrorSeries>& series) {
  std::map<double, std::vector<double>> rows;
  std::map<double, int> counts;
  for (size_t k = 0; k < series.size(); ++k) {
    for (size_t i = 0; i < series[k].t.size(); ++i) {
      auto& row = rows[series[k].t[i]];
      row.resize(series.size(), std::nan(""));
      row[k] = series[k].e_s[i];
      ++counts[series[k].t[i]];
    }
  }
  std::vector<std::string> columns;
  for (const auto& s : series) columns.push_back(s.label);
  std::vector<std::vector<double>> table;
  for (const auto& [t, values] : rows) {
    if (counts[t] != static_cast<int>(series.size())) continue;
    std::vector<double> row{t};
    row.insert(row.end(), values.begin(), values.end());
    table.push_back(std::move(row));
  }
  write_timeseries(path, columns, table);
}

}  // namespace mspflow
