#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mspflow/msbasis.hpp"
#include "mspflow/pimpes.hpp"

namespace mspflow {

/// Coarse-space operators for one time step.
struct CoarseOperators {
  SparseMatrix PhiT;  // Phi_v^T
  SparseMatrix A;     // Phi_v^T A Phi_v
  SparseMatrix C;     // Phi_v^T C Phi_p

  CoarseOperators(const MultiscaleSpace& space, const SparseMatrix& fine_C, const MobilityOperators& mob);
};

/// Capillary pressure averaged over each coarse cell, expanded to fine cells.
Vector coarse_average(const GridHierarchy& grid, const Vector& field);

struct CoarseSolution {
  Vector u_coeffs;
  Vector p_coarse;
  Vector ut;  // Phi_v u_coeffs
  Vector pw;  // Phi_p p_coarse
  Vector pn;  // pw + averaged capillary pressure
};

/// Reduced capillary solve; returns the fine-edge flux Phi_v xi_coeffs.
Vector ms_step_capillary(const Problem& problem, const MultiscaleSpace& space, const FineOperators& ops,
                         const CoarseOperators& cops, const MobilityOperators& mob, const Vector& sw);

/// Reduced pressure/velocity solve; the constraint row uses upwind directions
/// from the fluxes stored in `state`.
CoarseSolution ms_step_pressure_velocity(const Problem& problem, const MultiscaleSpace& space,
                                         const FineOperators& ops, const CoarseOperators& cops,
                                         const MobilityOperators& mob, const State& state, const Vector& xi_H);

/// Coarse cells on which q_t is not constant.
std::vector<int> nonconstant_source_cells(const GridHierarchy& grid, const Vector& qt);

/// Replaces the multiscale flux inside every coarse cell with a nonconstant
/// source by a local fine solve with mobility lambda_t(sw, sn) K, the boundary
/// flux of the cell held fixed and the divergence matched to q_t per fine cell.
Vector postprocess_velocity(const Problem& problem, const Vector& ut_H, const Vector& sw, const Vector& sn,
                            std::vector<int>* processed = nullptr);

struct MsRunOptions {
  bool monitor = true;
  const Trajectory* reference = nullptr;  // e_s and flux sign at every step the reference stores
  std::string basis_cache;                // directory; empty disables the cache
};

struct MsRunResult {
  Trajectory trajectory;
  RunReport report;
  MultiscaleSpace space;  // space in use at the final time
  std::vector<EnrichmentState> enrichment;  // one per build
};

/// Builds the "l+k" space for mobility lambda_t(sw, sn) K, through the cache when given.
MultiscaleSpace build_space(const Problem& problem, const Vector& sw, const Vector& sn, const BasisConfig& config,
                            const std::string& cache_dir, EnrichmentState* state = nullptr);

MsRunResult run_ms(const Problem& problem, const TimeGrid& time, const State& initial, const BasisConfig& basis,
                   const MsRunOptions& options = {});

}  // namespace mspflow
