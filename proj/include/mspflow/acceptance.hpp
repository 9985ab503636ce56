#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mspflow/config.hpp"
#include "mspflow/experiments.hpp"

namespace mspflow {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;  // measured values against their thresholds
};

struct AcceptanceOptions {
  std::string out_dir;  // sweep CSVs and the summary are written here when set
  std::function<void(const std::string&)> log;  // progress messages
};

/// Max over shared output times and cells of |S'_n - S_w|, where `swapped` ran
/// the phase-relabeled problem.
double swap_deviation(const Trajectory& original, const Trajectory& swapped);

/// The state with the two phases relabeled.
State swapped_state(const State& s);

/// Explicit transport update written independently of the solver: a per-cell
/// balance with upwind cells chosen from the averaged phase-flux reconstruction.
Vector oracle_saturation_step(const Problem& problem, const Vector& sw, const Vector& ut, const Vector& xi, double dt);

/// Runs the acceptance battery on `config` (the 100x100 five-point setup) and
/// returns one result per criterion; `on_result` is called as each completes.
std::vector<CriterionResult> run_acceptance(const RunConfig& config, const AcceptanceOptions& options = {},
                                            const std::function<void(const CriterionResult&)>& on_result = {});

/// "PASS [n] title: detail" or "FAIL [n] ...".
std::string format_result(const CriterionResult& r);

}  // namespace mspflow
