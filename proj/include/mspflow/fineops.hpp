#pragma once

#include <Eigen/SparseCore>
#include <vector>

#include "mspflow/mesh.hpp"
#include "mspflow/physics.hpp"

namespace mspflow {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Boundary data on the fine grid. Every boundary edge is Neumann unless marked
/// Dirichlet; Neumann edges carry a prescribed outward normal flux (default 0).
struct BoundaryConditions {
  std::vector<char> dirichlet;  // per fine edge; empty means no Dirichlet edges
  Vector neumann_flux;          // per fine edge, outward u.n; empty means no-flow
  double pw_boundary = 0.0;
  double pn_boundary = 0.0;

  static BoundaryConditions no_flow() { return {}; }
  bool is_dirichlet(int e) const { return !dirichlet.empty() && dirichlet[e] != 0; }
  bool has_dirichlet() const;
  bool is_no_flow() const;
};

/// Outward sign of the domain boundary relative to a boundary edge's stored normal.
int boundary_outward(const GridHierarchy& grid, int e);

/// Velocity unknowns: every fine edge except Neumann boundary edges.
struct DofLayout {
  std::vector<int> edge_to_dof;  // -1 on Neumann boundary edges
  std::vector<int> dof_to_edge;
  int num_cells = 0;

  static DofLayout build(const GridHierarchy& grid, const BoundaryConditions& bc);
  int num_velocity_dofs() const { return static_cast<int>(dof_to_edge.size()); }
  /// Edge vector holding the prescribed Neumann values in stored orientation, zero elsewhere.
  Vector prescribed_fluxes(const GridHierarchy& grid, const BoundaryConditions& bc) const;
  /// Selection matrix R with R * full_edge_vector = dof_vector.
  SparseMatrix restriction() const;
  Vector restrict_vector(const Vector& edge_values) const;
  Vector extend_vector(const Vector& dof_values, const Vector& prescribed) const;
};

enum class MassQuadrature { Exact, Lumped };

/// Mass matrix of the RT0 space with per-cell weight `kappa_inv`. Exact
/// integration couples the two parallel edges of each cell; the lumped variant
/// keeps only the diagonal (h^2/2 per cell side).
SparseMatrix assemble_mass(const GridHierarchy& grid, const Vector& kappa_inv,
                           MassQuadrature quadrature = MassQuadrature::Exact);

/// Divergence coupling C[e,c] = integral over cell c of div(v_e); entries +-h.
SparseMatrix assemble_divergence(const GridHierarchy& grid);

struct StaticOperators {
  SparseMatrix C;  // num_edges x num_cells
  Vector P;        // diagonal, cell areas
  Vector D;        // Dirichlet boundary vector
  Vector F_w;
  Vector F_n;
};

StaticOperators assemble_static(const GridHierarchy& grid, const Sources& sources, const BoundaryConditions& bc);

struct MobilityOperators {
  SparseMatrix A;    // kappa_n^{-1} weighted
  SparseMatrix A_n;  // f_n kappa_n^{-1} weighted
  Vector P_c;        // capillary pressure per cell
  Vector E;          // gravity vector, zero when gravity is off
};

MobilityOperators assemble_mobility(const GridHierarchy& grid, const Medium& medium, const FluidProps& props,
                                    const Vector& sw, const CapillaryModel& capillary, const GravityModel& gravity,
                                    MassQuadrature quadrature = MassQuadrature::Exact);
/// Same with the non-wetting mobility evaluated at `sn`.
MobilityOperators assemble_mobility(const GridHierarchy& grid, const Medium& medium, const FluidProps& props,
                                    const Vector& sw, const Vector& sn, const CapillaryModel& capillary,
                                    const GravityModel& gravity, MassQuadrature quadrature = MassQuadrature::Exact);

/// Gravity vector E[e] = g * integral of grad(z) . v_e for a cellwise depth z.
Vector assemble_gravity(const GridHierarchy& grid, const SparseMatrix& C, const GravityModel& gravity);

/// Upwind cell per fine edge and phase.
struct UpwindChoice {
  std::vector<int> w;
  std::vector<int> n;
};

/// Phase directions from the reconstructed phase fluxes
/// u_w.n = fw_avg u_t.n - (fw fn)_avg xi_c.n,  u_n.n = fn_avg u_t.n + (fw fn)_avg xi_c.n.
/// A nonnegative phase flux selects the minus-side cell, a negative one the plus side.
/// Boundary edges always use their single adjacent cell.
UpwindChoice upwind_directions(const GridHierarchy& grid, const Vector& ut, const Vector& xi, const Vector& sw,
                               const FluidProps& props);
/// Same rule with the per-cell fractional flows already evaluated.
void upwind_directions(const GridHierarchy& grid, const Vector& ut, const Vector& xi, const Vector& fw,
                       const Vector& fn, UpwindChoice& out);

struct UpwindOperators {
  SparseMatrix B_w;  // num_cells x num_edges
  SparseMatrix B_n;
  SparseMatrix B_c;
  SparseMatrix B_t;
};

/// Builds the cell-by-edge sparsity pattern once (four entries per row, ordered
/// left, right, bottom, top) and refills values for every new saturation.
class UpwindAssembler {
 public:
  explicit UpwindAssembler(const GridHierarchy& grid);
  void assemble(const Vector& sw, const UpwindChoice& choice, const FluidProps& props, UpwindOperators& out) const;
  UpwindOperators assemble(const Vector& sw, const UpwindChoice& choice, const FluidProps& props) const;
  /// Refill from per-cell fractional flows.
  void assemble_from_flows(const Vector& fw, const Vector& fn, const UpwindChoice& choice,
                           UpwindOperators& out) const;

 private:
  GridHierarchy grid_;
  SparseMatrix pattern_;
};

UpwindOperators assemble_upwind(const GridHierarchy& grid, const Vector& sw, const UpwindChoice& choice,
                                const FluidProps& props);

/// Fractional flows evaluated once per cell.
void cell_fractional_flows(const Vector& sw, const FluidProps& props, Vector& fw, Vector& fn);
void cell_fractional_flows(const Vector& sw, const Vector& sn, const FluidProps& props, Vector& fw, Vector& fn);

}  // namespace mspflow
