#include "mspflow/verify.hpp"

#include <algorithm>
#include <cmath>

#include "mspflow/errors.hpp"

namespace mspflow {

double RunReport::max_conservation() const {
  double m = 0.0;
  for (const StepRecord& r : steps) m = std::max({m, r.conservation_w, r.conservation_n});
  return m;
}

double RunReport::max_dual_consistency() const {
  double m = 0.0;
  for (const StepRecord& r : steps) m = std::max(m, r.dual_consistency);
  return m;
}

int RunReport::total_bounds_violations() const {
  int n = 0;
  for (const StepRecord& r : steps) n += r.bounds_violations;
  return n;
}

Vector conservation_residual(const GridHierarchy& grid, const Vector& s_prev, const Vector& s_next, const Vector& ut,
                             const Vector& xi, const Sources& sources, double dt, const FluidProps& props,
                             Phase phase, const Vector& sw_prev, const Vector& sn_prev) {
  const int nc = grid.num_cells();
  if (s_prev.size() != nc || s_next.size() != nc || sw_prev.size() != nc ||
      (sn_prev.size() != 0 && sn_prev.size() != nc)) {
    throw AssemblyError("conservation_residual: saturation size mismatch");
  }
  Vector fw(nc), fn(nc);
  for (int c = 0; c < nc; ++c) {
    const PhasePair f = sn_prev.size() ? fractional_flows(sw_prev[c], sn_prev[c], props)
                                       : fractional_flows(sw_prev[c], props);
    fw[c] = f.w;
    fn[c] = f.n;
  }
  UpwindChoice ch;
  upwind_directions(grid, ut, xi, fw, fn, ch);
  const double h = grid.h();
  const double area = grid.cell_area();
  const bool wet = phase == Phase::Wetting;
  const double sigma = wet ? 1.0 : -1.0;
  const Vector& q = wet ? sources.qw : sources.qn;

  Vector res(nc);
  for (int c = 0; c < nc; ++c) res[c] = props.porosity * (s_next[c] - s_prev[c]) * area / dt - q[c] * area;
  // Edge loop: the phase flux leaves the minus cell and enters the plus cell.
  for (int e = 0; e < grid.num_edges(); ++e) {
    const double fa = wet ? fw[ch.w[e]] : fn[ch.n[e]];
    const double coupling = fw[ch.w[e]] * fn[ch.n[e]];
    const double flux = h * (fa * ut[e] - sigma * coupling * xi[e]);
    const EdgeCells ec = grid.edge_cells(e);
    if (ec.minus >= 0) res[ec.minus] += flux;
    if (ec.plus >= 0) res[ec.plus] -= flux;
  }
  return res;
}

std::vector<BoundsViolation> bounds_check(const Vector& s, double tol) {
  std::vector<BoundsViolation> out;
  for (Eigen::Index c = 0; c < s.size(); ++c) {
    if (s[c] < -tol || s[c] > 1.0 + tol || !std::isfinite(s[c])) out.push_back({static_cast<int>(c), s[c]});
  }
  return out;
}

double l2_error(const Vector& s, const Vector& s_ref, double cell_area) {
  if (s.size() != s_ref.size()) throw AssemblyError("l2_error: field size mismatch");
  const double ref = std::sqrt(cell_area * s_ref.squaredNorm());
  if (!(ref > 0.0)) throw AssemblyError("l2_error: reference field has zero norm");
  return std::sqrt(cell_area * (s - s_ref).squaredNorm()) / ref;
}

double flux_sign_agreement(const GridHierarchy& grid, const Vector& u_fine, const Vector& u_ms) {
  if (u_fine.size() != grid.num_edges() || u_ms.size() != grid.num_edges()) {
    throw AssemblyError("flux_sign_agreement: flux size mismatch");
  }
  long total = 0;
  long agree = 0;
  for (int e = 0; e < grid.num_edges(); ++e) {
    if (grid.is_boundary_edge(e)) continue;
    ++total;
    const double a = u_fine[e];
    const double b = u_ms[e];
    if ((std::abs(a) < 1e-14 && std::abs(b) < 1e-14) || a * b >= 0.0) ++agree;
  }
  return total == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(total);
}

std::optional<double> stability_ratio(const GridHierarchy& grid, const Vector& ut, const Vector& qt,
                                      const SparseMatrix& mass) {
  const double q_norm = std::sqrt(grid.cell_area() * qt.squaredNorm());
  if (!(q_norm > 0.0)) return std::nullopt;
  return std::sqrt(std::max(0.0, ut.dot(mass * ut))) / q_norm;
}

}  // namespace mspflow
