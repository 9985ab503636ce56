#include "mspflow/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mspflow/errors.hpp"

namespace mspflow {

namespace {

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("output: cannot write " + path);
  return out;
}

std::string time_tag(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "t%g", t);
  return buf;
}

}  // namespace

void ensure_writable_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw ConfigError("output: cannot create directory " + dir);
  const std::filesystem::path probe = std::filesystem::path(dir) / ".mspflow_write_test";
  {
    std::ofstream out(probe);
    if (!out) throw ConfigError("output: directory is not writable: " + dir);
  }
  std::filesystem::remove(probe, ec);
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_field_csv(const std::string& path, const GridHierarchy& grid, const Vector& values) {
  if (values.size() != grid.num_cells()) throw AssemblyError("write_field_csv: field size mismatch");
  std::ofstream out = open_for_write(path);
  out << "x,y,value\n";
  const double h = grid.h();
  for (int j = 0; j < grid.ny(); ++j) {
    for (int i = 0; i < grid.nx(); ++i) {
      out << format_number((i + 0.5) * h) << ',' << format_number((j + 0.5) * h) << ','
          << format_number(values[grid.cell(i, j)]) << '\n';
    }
  }
}

void write_fields_vtk(const std::string& path, const GridHierarchy& grid,
                      const std::vector<std::pair<std::string, Vector>>& fields) {
  std::ofstream out = open_for_write(path);
  out << "# vtk DataFile Version 3.0\n"
      << "mspflow fields\n"
      << "ASCII\n"
      << "DATASET STRUCTURED_POINTS\n"
      << "DIMENSIONS " << grid.nx() + 1 << ' ' << grid.ny() + 1 << " 1\n"
      << "ORIGIN 0 0 0\n"
      << "SPACING " << format_number(grid.h()) << ' ' << format_number(grid.h()) << " 1\n"
      << "CELL_DATA " << grid.num_cells() << '\n';
  for (const auto& [name, values] : fields) {
    if (values.size() != grid.num_cells()) throw AssemblyError("write_fields_vtk: field size mismatch");
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (int c = 0; c < grid.num_cells(); ++c) out << format_number(values[c]) << '\n';
  }
}

void write_timeseries(const std::string& path, const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream out = open_for_write(path);
  out << 't';
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  for (const auto& row : rows) {
    for (size_t k = 0; k < row.size(); ++k) {
      if (k) out << ',';
      if (std::isnan(row[k])) continue;  // empty cell for missing values
      out << format_number(row[k]);
    }
    out << '\n';
  }
}

void write_report(const std::string& path, const RunReport& report) {
  const double nan = std::nan("");
  std::vector<std::vector<double>> rows;
  for (const StepRecord& r : report.steps) {
    rows.push_back({r.t, static_cast<double>(r.substeps), r.conservation_w, r.conservation_n, r.dual_consistency,
                    r.sw_min, r.sw_max, static_cast<double>(r.bounds_violations),
                    r.stability_ratio.value_or(nan), r.e_s.value_or(nan), r.flux_sign.value_or(nan),
                    r.rebuild ? 1.0 : 0.0});
  }
  write_timeseries(path,
                   {"substeps", "conservation_w", "conservation_n", "dual_consistency", "sw_min", "sw_max",
                    "bounds_violations", "stability_ratio", "e_s", "flux_sign", "rebuild"},
                   rows);
}

void write_trajectory(const std::string& dir, const std::string& prefix, const GridHierarchy& grid,
                      const Medium& medium, const Trajectory& trajectory, bool csv, bool vtk) {
  const Vector log_kappa = medium.kappa.array().log().matrix();
  const std::filesystem::path base(dir);
  if (csv) write_field_csv((base / (prefix + "_logk.csv")).string(), grid, log_kappa);
  for (const State& s : trajectory.states) {
    const std::string tag = time_tag(s.t);
    if (csv) {
      write_field_csv((base / (prefix + "_sw_" + tag + ".csv")).string(), grid, s.sw);
      write_field_csv((base / (prefix + "_sn_" + tag + ".csv")).string(), grid, s.sn);
      write_field_csv((base / (prefix + "_pw_" + tag + ".csv")).string(), grid, s.pw);
    }
    if (vtk) {
      write_fields_vtk((base / (prefix + "_" + tag + ".vtk")).string(), grid,
                       {{"S_w", s.sw}, {"S_n", s.sn}, {"p_w", s.pw}, {"log_kappa", log_kappa}});
    }
  }
}

}  // namespace mspflow
