#include "mspflow/fineops.hpp"

#include <cmath>
#include <string>

#include "mspflow/errors.hpp"

namespace mspflow {

using Triplet = Eigen::Triplet<double>;

bool BoundaryConditions::has_dirichlet() const {
  for (char d : dirichlet) {
    if (d) return true;
  }
  return false;
}

bool BoundaryConditions::is_no_flow() const {
  if (has_dirichlet()) return false;
  return neumann_flux.size() == 0 || neumann_flux.cwiseAbs().maxCoeff() == 0.0;
}

int boundary_outward(const GridHierarchy& grid, int e) {
  const EdgeCells ec = grid.edge_cells(e);
  if (ec.minus >= 0 && ec.plus >= 0) throw DomainError("boundary_outward: edge " + std::to_string(e) + " is interior");
  return ec.plus < 0 ? +1 : -1;
}

DofLayout DofLayout::build(const GridHierarchy& grid, const BoundaryConditions& bc) {
  const int ne = grid.num_edges();
  if (!bc.dirichlet.empty() && static_cast<int>(bc.dirichlet.size()) != ne) {
    throw ConfigError("boundary: dirichlet mask has wrong length");
  }
  if (bc.neumann_flux.size() != 0 && bc.neumann_flux.size() != ne) {
    throw ConfigError("boundary: neumann flux vector has wrong length");
  }
  DofLayout d;
  d.num_cells = grid.num_cells();
  d.edge_to_dof.assign(ne, -1);
  for (int e = 0; e < ne; ++e) {
    const bool boundary = grid.is_boundary_edge(e);
    if (!boundary && bc.is_dirichlet(e)) throw ConfigError("boundary: Dirichlet flag on interior edge");
    if (boundary && !bc.is_dirichlet(e)) continue;
    d.edge_to_dof[e] = static_cast<int>(d.dof_to_edge.size());
    d.dof_to_edge.push_back(e);
  }
  return d;
}

Vector DofLayout::prescribed_fluxes(const GridHierarchy& grid, const BoundaryConditions& bc) const {
  Vector out = Vector::Zero(grid.num_edges());
  if (bc.neumann_flux.size() == 0) return out;
  for (int e = 0; e < grid.num_edges(); ++e) {
    if (edge_to_dof[e] < 0) out[e] = boundary_outward(grid, e) * bc.neumann_flux[e];
  }
  return out;
}

SparseMatrix DofLayout::restriction() const {
  SparseMatrix R(num_velocity_dofs(), static_cast<Eigen::Index>(edge_to_dof.size()));
  R.reserve(Eigen::VectorXi::Constant(num_velocity_dofs(), 1));
  for (int k = 0; k < num_velocity_dofs(); ++k) R.insert(k, dof_to_edge[k]) = 1.0;
  R.makeCompressed();
  return R;
}

Vector DofLayout::restrict_vector(const Vector& edge_values) const {
  Vector out(num_velocity_dofs());
  for (int k = 0; k < num_velocity_dofs(); ++k) out[k] = edge_values[dof_to_edge[k]];
  return out;
}

Vector DofLayout::extend_vector(const Vector& dof_values, const Vector& prescribed) const {
  Vector out = prescribed;
  for (int k = 0; k < num_velocity_dofs(); ++k) out[dof_to_edge[k]] = dof_values[k];
  return out;
}

namespace {

SparseMatrix mass_with_weight(const GridHierarchy& grid, const Vector& weight, MassQuadrature quadrature,
                              bool require_positive) {
  if (weight.size() != grid.num_cells()) throw AssemblyError("assemble_mass: weight size mismatch");
  const double h2 = grid.cell_area();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(grid.num_cells()) * 8);
  for (int c = 0; c < grid.num_cells(); ++c) {
    const double w = weight[c];
    if (!std::isfinite(w) || w < 0.0 || (require_positive && !(w > 0.0))) {
      throw AssemblyError("assemble_mass: nonpositive mobility in cell " + std::to_string(c));
    }
    const auto edges = grid.cell_edges(c);
    for (int axis = 0; axis < 2; ++axis) {
      const int a = edges[2 * axis].edge;
      const int b = edges[2 * axis + 1].edge;
      if (quadrature == MassQuadrature::Exact) {
        trip.emplace_back(a, a, w * h2 / 3.0);
        trip.emplace_back(b, b, w * h2 / 3.0);
        trip.emplace_back(a, b, w * h2 / 6.0);
        trip.emplace_back(b, a, w * h2 / 6.0);
      } else {
        trip.emplace_back(a, a, w * h2 / 2.0);
        trip.emplace_back(b, b, w * h2 / 2.0);
      }
    }
  }
  SparseMatrix A(grid.num_edges(), grid.num_edges());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

}  // namespace

SparseMatrix assemble_mass(const GridHierarchy& grid, const Vector& kappa_inv, MassQuadrature quadrature) {
  return mass_with_weight(grid, kappa_inv, quadrature, true);
}

SparseMatrix assemble_divergence(const GridHierarchy& grid) {
  const double h = grid.h();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(grid.num_edges()) * 2);
  for (int e = 0; e < grid.num_edges(); ++e) {
    const EdgeCells ec = grid.edge_cells(e);
    // Positive flux leaves the minus cell and enters the plus cell.
    if (ec.minus >= 0) trip.emplace_back(e, ec.minus, h);
    if (ec.plus >= 0) trip.emplace_back(e, ec.plus, -h);
  }
  SparseMatrix C(grid.num_edges(), grid.num_cells());
  C.setFromTriplets(trip.begin(), trip.end());
  return C;
}

StaticOperators assemble_static(const GridHierarchy& grid, const Sources& sources, const BoundaryConditions& bc) {
  if (sources.qw.size() != grid.num_cells() || sources.qn.size() != grid.num_cells()) {
    throw AssemblyError("assemble_static: source field size mismatch");
  }
  StaticOperators ops;
  ops.C = assemble_divergence(grid);
  const double area = grid.cell_area();
  ops.P = Vector::Constant(grid.num_cells(), area);
  ops.F_w = sources.qw * area;
  ops.F_n = sources.qn * area;
  ops.D = Vector::Zero(grid.num_edges());
  for (int e = 0; e < grid.num_edges(); ++e) {
    if (bc.is_dirichlet(e)) ops.D[e] = boundary_outward(grid, e) * grid.h();
  }
  return ops;
}

Vector assemble_gravity(const GridHierarchy& grid, const SparseMatrix& C, const GravityModel& gravity) {
  if (!gravity.enabled) return Vector::Zero(grid.num_edges());
  const Vector z = gravity.depth.size() == grid.num_cells() ? gravity.depth : depth_from_top(grid);
  // Discrete gradient of the cellwise depth; exact for linear z on interior edges.
  return -gravity.g * (C * z);
}

MobilityOperators assemble_mobility(const GridHierarchy& grid, const Medium& medium, const FluidProps& props,
                                    const Vector& sw, const CapillaryModel& capillary, const GravityModel& gravity,
                                    MassQuadrature quadrature) {
  return assemble_mobility(grid, medium, props, sw, Vector::Ones(sw.size()) - sw, capillary, gravity, quadrature);
}

MobilityOperators assemble_mobility(const GridHierarchy& grid, const Medium& medium, const FluidProps& props,
                                    const Vector& sw, const Vector& sn, const CapillaryModel& capillary,
                                    const GravityModel& gravity, MassQuadrature quadrature) {
  if (sw.size() != grid.num_cells() || sn.size() != grid.num_cells()) {
    throw AssemblyError("assemble_mobility: saturation size mismatch");
  }
  const Vector kappa_n = total_mobility_field(sw, sn, medium, props);
  Vector kinv(grid.num_cells());
  Vector fn_kinv(grid.num_cells());
  for (int c = 0; c < grid.num_cells(); ++c) {
    if (!(kappa_n[c] > 0.0)) throw AssemblyError("assemble_mobility: nonpositive mobility in cell " + std::to_string(c));
    kinv[c] = 1.0 / kappa_n[c];
    fn_kinv[c] = fractional_flows(sw[c], sn[c], props).n * kinv[c];
  }
  MobilityOperators ops;
  ops.A = assemble_mass(grid, kinv, quadrature);
  // A_n vanishes where f_n = 0, so zero weights are allowed there.
  ops.A_n = mass_with_weight(grid, fn_kinv, quadrature, false);
  ops.P_c = capillary.pc_field(sw);
  ops.E = assemble_gravity(grid, assemble_divergence(grid), gravity);
  return ops;
}

void cell_fractional_flows(const Vector& sw, const FluidProps& props, Vector& fw, Vector& fn) {
  cell_fractional_flows(sw, Vector::Ones(sw.size()) - sw, props, fw, fn);
}

void cell_fractional_flows(const Vector& sw, const Vector& sn, const FluidProps& props, Vector& fw, Vector& fn) {
  if (sn.size() != sw.size()) throw AssemblyError("fractional flows: saturation size mismatch");
  fw.resize(sw.size());
  fn.resize(sw.size());
  for (Eigen::Index c = 0; c < sw.size(); ++c) {
    const PhasePair f = fractional_flows(sw[c], sn[c], props);
    fw[c] = f.w;
    fn[c] = f.n;
  }
}

UpwindChoice upwind_directions(const GridHierarchy& grid, const Vector& ut, const Vector& xi, const Vector& sw,
                               const FluidProps& props) {
  if (sw.size() != grid.num_cells()) throw AssemblyError("upwind_directions: saturation size mismatch");
  Vector fw, fn;
  cell_fractional_flows(sw, props, fw, fn);
  UpwindChoice ch;
  upwind_directions(grid, ut, xi, fw, fn, ch);
  return ch;
}

void upwind_directions(const GridHierarchy& grid, const Vector& ut, const Vector& xi, const Vector& fw,
                       const Vector& fn, UpwindChoice& ch) {
  const int ne = grid.num_edges();
  if (ut.size() != ne || xi.size() != ne || fw.size() != grid.num_cells()) {
    throw AssemblyError("upwind_directions: field size mismatch");
  }
  ch.w.resize(ne);
  ch.n.resize(ne);
  for (int e = 0; e < ne; ++e) {
    const EdgeCells ec = grid.edge_cells(e);
    if (ec.minus < 0 || ec.plus < 0) {
      const int own = ec.minus >= 0 ? ec.minus : ec.plus;
      ch.w[e] = own;
      ch.n[e] = own;
      continue;
    }
    if (xi[e] == 0.0) {
      // Both phases move with the total flux; deciding on u_t alone keeps the
      // choice identical for the two phases even where a product rounds to -0.
      const int cell = ut[e] >= 0.0 ? ec.minus : ec.plus;
      ch.w[e] = cell;
      ch.n[e] = cell;
      continue;
    }
    const double fw_avg = 0.5 * (fw[ec.minus] + fw[ec.plus]);
    const double fn_avg = 0.5 * (fn[ec.minus] + fn[ec.plus]);
    const double fwfn_avg = 0.5 * (fw[ec.minus] * fn[ec.minus] + fw[ec.plus] * fn[ec.plus]);
    const double uw = fw_avg * ut[e] - fwfn_avg * xi[e];
    const double un = fn_avg * ut[e] + fwfn_avg * xi[e];
    ch.w[e] = uw >= 0.0 ? ec.minus : ec.plus;
    ch.n[e] = un >= 0.0 ? ec.minus : ec.plus;
  }
}

UpwindAssembler::UpwindAssembler(const GridHierarchy& grid) : grid_(grid) {
  pattern_.resize(grid.num_cells(), grid.num_edges());
  pattern_.reserve(Eigen::VectorXi::Constant(grid.num_cells(), 4));
  for (int c = 0; c < grid.num_cells(); ++c) {
    for (const CellEdge& ce : grid.cell_edges(c)) pattern_.insert(c, ce.edge) = 0.0;
  }
  pattern_.makeCompressed();
}

void UpwindAssembler::assemble(const Vector& sw, const UpwindChoice& choice, const FluidProps& props,
                               UpwindOperators& out) const {
  if (sw.size() != grid_.num_cells()) throw AssemblyError("assemble_upwind: saturation size mismatch");
  Vector fw, fn;
  cell_fractional_flows(sw, props, fw, fn);
  assemble_from_flows(fw, fn, choice, out);
}

void UpwindAssembler::assemble_from_flows(const Vector& fw, const Vector& fn, const UpwindChoice& choice,
                                          UpwindOperators& out) const {
  const GridHierarchy& grid = grid_;
  if (fw.size() != grid.num_cells() || static_cast<int>(choice.w.size()) != grid.num_edges()) {
    throw AssemblyError("assemble_upwind: size mismatch");
  }
  if (out.B_w.nonZeros() != pattern_.nonZeros()) {
    out.B_w = pattern_;
    out.B_n = pattern_;
    out.B_c = pattern_;
    out.B_t = pattern_;
  }
  const double h = grid.h();
  double* vw = out.B_w.valuePtr();
  double* vn = out.B_n.valuePtr();
  double* vc = out.B_c.valuePtr();
  double* vt = out.B_t.valuePtr();
  for (int c = 0; c < grid.num_cells(); ++c) {
    const auto edges = grid.cell_edges(c);
    // Left, right, bottom, top is ascending edge order, matching the stored columns.
    for (int k = 0; k < 4; ++k) {
      const int e = edges[k].edge;
      const double s = edges[k].outward * h;
      const double fws = fw[choice.w[e]];
      const double fns = fn[choice.n[e]];
      const size_t idx = static_cast<size_t>(4 * c + k);
      vw[idx] = s * fws;
      vn[idx] = s * fns;
      vc[idx] = s * (fws * fns);
      vt[idx] = s * (fws + fns);
    }
  }
}

UpwindOperators UpwindAssembler::assemble(const Vector& sw, const UpwindChoice& choice,
                                          const FluidProps& props) const {
  UpwindOperators out;
  assemble(sw, choice, props, out);
  return out;
}

UpwindOperators assemble_upwind(const GridHierarchy& grid, const Vector& sw, const UpwindChoice& choice,
                                const FluidProps& props) {
  return UpwindAssembler(grid).assemble(sw, choice, props);
}

}  // namespace mspflow
