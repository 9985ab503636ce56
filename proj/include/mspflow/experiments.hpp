#pragma once

#include <string>
#include <vector>

#include "mspflow/config.hpp"
#include "mspflow/mssolver.hpp"

namespace mspflow {

/// Fine reference at `config.sweep.reference_dt`, storing every step. With a
/// cache directory the run is loaded from there when its key matches, and
/// saved there otherwise.
RunResult reference_run(const RunConfig& config, const std::string& cache_dir = "", bool monitor = false);

/// Key identifying a reference run: grid, fluids, medium and source fields, time grid.
std::string reference_key(const RunConfig& config, const Problem& problem);

/// e_s and flux-sign agreement of one multiscale run against a reference.
struct ErrorSeries {
  std::string label;
  std::vector<double> t;
  std::vector<double> e_s;
  std::vector<double> flux_sign;

  double final_error() const { return e_s.empty() ? 0.0 : e_s.back(); }
  double final_flux_sign() const { return flux_sign.empty() ? 1.0 : flux_sign.back(); }
};

struct MsCase {
  std::string label;  // column name
  int block = 0;      // 0: configured block
  double dt = 0.0;    // 0: configured dt
  std::string bases;  // empty: configured "l+k"
};

struct CaseResult {
  ErrorSeries series;
  MsRunResult run;
};

/// Basis recipe `label` ("l+k") with the configured tolerance, oversampling and
/// solver settings; an empty label gives the configured recipe.
BasisConfig basis_for(const RunConfig& config, const std::string& label);

/// Runs the multiscale solver for one case against `reference`.
CaseResult run_case(const RunConfig& config, const MsCase& c, const Trajectory& reference, bool monitor = false);

/// Cases for the time step, coarse mesh and basis sweeps.
std::vector<MsCase> dt_cases(const RunConfig& config);
std::vector<MsCase> h_cases(const RunConfig& config);
std::vector<MsCase> basis_cases(const RunConfig& config);

/// Rows `t, e_s(case 1), ...` at the times where every series has a value.
void write_error_table(const std::string& path, const std::vector<ErrorSeries>& series);

}  // namespace mspflow
