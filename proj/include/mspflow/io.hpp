#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mspflow/pimpes.hpp"

namespace mspflow {

/// Creates `dir` if needed and checks that a file can be written there.
/// Raises ConfigError otherwise.
void ensure_writable_dir(const std::string& dir);

/// "%.17g".
std::string format_number(double v);

/// CSV with header `x,y,value`, one row per cell at its center, row-major.
void write_field_csv(const std::string& path, const GridHierarchy& grid, const Vector& values);

/// Legacy ASCII VTK STRUCTURED_POINTS file with one CELL_DATA scalar per field.
void write_fields_vtk(const std::string& path, const GridHierarchy& grid,
                      const std::vector<std::pair<std::string, Vector>>& fields);

/// CSV with header `t,<columns...>`; rows hold one value per column.
void write_timeseries(const std::string& path, const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows);

/// Per-step diagnostics of a run as a time series.
void write_report(const std::string& path, const RunReport& report);

/// Writes S_w, S_n, p_w (and log kappa once) for every stored state with the
/// given prefix, e.g. `<dir>/<prefix>_sw_t8000.csv` and `<dir>/<prefix>_t8000.vtk`.
void write_trajectory(const std::string& dir, const std::string& prefix, const GridHierarchy& grid,
                      const Medium& medium, const Trajectory& trajectory, bool csv, bool vtk);

}  // namespace mspflow
