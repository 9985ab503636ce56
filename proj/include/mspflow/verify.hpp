#pragma once

#include <optional>
#include <vector>

#include "mspflow/fineops.hpp"

namespace mspflow {

/// Diagnostics of one time step. Conservation residuals are the largest
/// per-cell imbalance over the step's transport substeps, divided by
/// porosity * h^2 / dt_sub.
struct StepRecord {
  int step = 0;
  double t = 0.0;
  bool output = false;
  bool rebuild = false;
  int substeps = 1;
  double dt_sub = 0.0;
  double conservation_w = 0.0;
  double conservation_n = 0.0;
  double dual_consistency = 0.0;
  double sw_min = 0.0;
  double sw_max = 0.0;
  int bounds_violations = 0;
  std::optional<double> stability_ratio;
  std::optional<double> e_s;
  std::optional<double> flux_sign;
};

struct RunReport {
  std::vector<StepRecord> steps;
  /// Global residual norm before each enrichment iteration and after the last
  /// one, for every basis build (initial build first, then each rebuild).
  std::vector<std::vector<double>> enrichment_residuals;
  std::vector<int> rebuild_steps;

  double max_conservation() const;
  double max_dual_consistency() const;
  int total_bounds_violations() const;
};

/// Per-cell residual of the discrete balance of one phase over one explicit update:
/// porosity (S_next - S_prev) h^2 / dt + sum_edges f_a u.n h - q_a h^2 - sigma_a sum_edges f_w f_n xi.n h,
/// with sigma_w = +1, sigma_n = -1 and the upwind values the solver uses at S_prev.
/// `sources` are the phase sources applied in the update. Fractional flows are
/// taken at (sw_prev, sn_prev); an empty `sn_prev` stands for 1 - sw_prev.
Vector conservation_residual(const GridHierarchy& grid, const Vector& s_prev, const Vector& s_next, const Vector& ut,
                             const Vector& xi, const Sources& sources, double dt, const FluidProps& props,
                             Phase phase, const Vector& sw_prev, const Vector& sn_prev = Vector());

/// Scale used to report conservation residuals relative to the update size.
inline double conservation_scale(const GridHierarchy& grid, const FluidProps& props, double dt) {
  return props.porosity * grid.cell_area() / dt;
}

struct BoundsViolation {
  int cell = -1;
  double value = 0.0;
};

/// Cells with S < -tol or S > 1 + tol.
std::vector<BoundsViolation> bounds_check(const Vector& s, double tol = 1e-12);

/// Cell-area weighted relative L2 error ||S - S_ref|| / ||S_ref||.
double l2_error(const Vector& s, const Vector& s_ref, double cell_area = 1.0);

/// Fraction of interior edges where the two flux fields point the same way.
/// Edges where both magnitudes are below 1e-14 count as agreeing.
double flux_sign_agreement(const GridHierarchy& grid, const Vector& u_fine, const Vector& u_ms);

/// ||u_t||_{kappa_n^{-1}} / ||q_t||_{L2}; empty when q_t vanishes.
/// `mass` is the kappa_n^{-1}-weighted velocity mass matrix on all fine edges.
std::optional<double> stability_ratio(const GridHierarchy& grid, const Vector& ut, const Vector& qt,
                                      const SparseMatrix& mass);

}  // namespace mspflow
