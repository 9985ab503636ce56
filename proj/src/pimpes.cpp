#include "mspflow/pimpes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mspflow/errors.hpp"

namespace mspflow {

void Problem::validate() const {
  props.validate();
  medium.validate(grid);
  if (sources.qw.size() != grid.num_cells() || sources.qn.size() != grid.num_cells()) {
    throw ConfigError("sources: field size does not match the grid");
  }
  if (gravity.enabled && gravity.depth.size() != 0 && gravity.depth.size() != grid.num_cells()) {
    throw ConfigError("gravity: depth field size does not match the grid");
  }
  if (capillary.enabled() && capillary.entry_pressure < 0.0) {
    throw ConfigError("capillary: entry pressure must be nonnegative");
  }
  if (!(solver_tol > 0.0)) throw ConfigError("solver: tolerance must be positive");
  // Builds and checks the boundary layout.
  const DofLayout layout = DofLayout::build(grid, bc);
  if (!bc.has_dirichlet()) {
    // Injected volume must balance the prescribed boundary outflow.
    const double area = grid.cell_area();
    double net = 0.0;
    double scale = 0.0;
    for (int c = 0; c < grid.num_cells(); ++c) {
      const double q = (sources.qw[c] + sources.qn[c]) * area;
      net += q;
      scale += std::abs(q);
    }
    if (bc.neumann_flux.size() != 0) {
      for (int e = 0; e < grid.num_edges(); ++e) {
        if (layout.edge_to_dof[e] >= 0) continue;
        net -= bc.neumann_flux[e] * grid.h();
        scale += std::abs(bc.neumann_flux[e]) * grid.h();
      }
    }
    if (std::abs(net) > 1e-12 * (1.0 + scale)) {
      throw CompatibilityError("sources: net injection " + std::to_string(net) +
                               " does not balance the boundary outflow");
    }
  }
}

Problem Problem::swapped() const {
  if (capillary.enabled()) {
    throw ConfigError("swap: the capillary law is not closed under exchanging the phases");
  }
  Problem s = *this;
  s.props = props.swapped();
  s.sources = sources.swapped();
  std::swap(s.bc.pw_boundary, s.bc.pn_boundary);
  return s;
}

State initial_state(const Problem& problem, const Vector& sw0) {
  const GridHierarchy& grid = problem.grid;
  if (sw0.size() != grid.num_cells()) throw ConfigError("initial saturation: size does not match the grid");
  State st;
  st.t = 0.0;
  st.sw = sw0;
  st.sn = Vector::Ones(grid.num_cells()) - sw0;
  st.pw = Vector::Zero(grid.num_cells());
  st.pn = problem.capillary.pc_field(sw0);
  st.ut = Vector::Zero(grid.num_edges());
  st.xi = Vector::Zero(grid.num_edges());
  return st;
}

State initial_state(const Problem& problem, double sw0) {
  return initial_state(problem, Vector::Constant(problem.grid.num_cells(), sw0));
}

void TimeGrid::validate() const {
  if (!(dt > 0.0)) throw ConfigError("time: dt must be positive");
  if (T < 0.0) throw ConfigError("time: T must be nonnegative");
  const double steps = T / dt;
  if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
    throw ConfigError("time: T must be a multiple of dt");
  }
  if (output_every < 1) throw ConfigError("time: output_every must be at least 1");
  if (!(cfl_safety > 0.0)) throw ConfigError("time: cfl_safety must be positive");
}

int TimeGrid::num_steps() const { return static_cast<int>(std::llround(T / dt)); }

bool TimeGrid::is_output_step(int step) const { return step % output_every == 0 || step == num_steps(); }

double cfl_dt(const GridHierarchy& grid, const FluidProps& props, const Vector& ut, const Vector& xi, double safety,
              const Vector& qt) {
  double umax = 0.0;
  for (Eigen::Index e = 0; e < ut.size(); ++e) {
    const double x = xi.size() == 0 ? 0.0 : std::abs(xi[e]);
    umax = std::max(umax, std::abs(ut[e]) + x);
  }
  // A producing cell drains at most q_t h^2 per unit time through its source term.
  const double qmax = qt.size() == 0 ? 0.0 : qt.cwiseAbs().maxCoeff() * grid.h();
  const double denom = std::max(umax, qmax);
  if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
  return safety * props.porosity * grid.h() / denom;
}

FineOperators::FineOperators(const Problem& problem)
    : layout(DofLayout::build(problem.grid, problem.bc)),
      R(layout.restriction()),
      Rt(R.transpose()),
      st(assemble_static(problem.grid, problem.sources, problem.bc)),
      G(R * st.C),
      prescribed(layout.prescribed_fluxes(problem.grid, problem.bc)),
      qt(problem.sources.total()),
      upwind(problem.grid) {}

Vector step_capillary(const Problem& problem, const FineOperators& ops, const MobilityOperators& mob) {
  const GridHierarchy& grid = problem.grid;
  const double dp_boundary = problem.bc.pn_boundary - problem.bc.pw_boundary;
  const bool active = problem.capillary.enabled() || problem.gravity.enabled || (problem.bc.has_dirichlet() &&
                                                                                dp_boundary != 0.0);
  if (!active) return Vector::Zero(grid.num_edges());
  Vector rhs = ops.st.C * mob.P_c - dp_boundary * ops.st.D;
  if (problem.gravity.enabled) rhs -= (problem.props.rho_n - problem.props.rho_w) * mob.E;
  // The capillary flux vanishes on Neumann boundary edges.
  const SparseMatrix Ar = ops.R * mob.A * ops.Rt;
  const Vector xr = SpdSolver(Ar, problem.solver_tol).solve(ops.R * rhs);
  return ops.Rt * xr;
}

PressureVelocity step_pressure_velocity(const Problem& problem, const FineOperators& ops,
                                        const MobilityOperators& mob, const State& state, const Vector& xi_next,
                                        std::optional<SaddleSolver>* cache) {
  const GridHierarchy& grid = problem.grid;
  UpwindChoice choice;
  Vector fw, fn;
  cell_fractional_flows(state.sw, state.sn, problem.props, fw, fn);
  upwind_directions(grid, state.ut, state.xi, fw, fn, choice);
  UpwindOperators up;
  ops.upwind.assemble_from_flows(fw, fn, choice, up);

  Vector f = mob.A_n * xi_next - problem.bc.pw_boundary * ops.st.D - mob.A * ops.prescribed;
  if (problem.gravity.enabled) f -= problem.props.rho_w * mob.E;
  const Vector g = ops.st.F_w + ops.st.F_n - up.B_t * ops.prescribed;
  const SparseMatrix Ar = ops.R * mob.A * ops.Rt;
  const SparseMatrix B = up.B_t * ops.Rt;
  std::optional<SaddleSolver> local;
  std::optional<SaddleSolver>& solver = cache ? *cache : local;
  if (solver) {
    solver->update(Ar, ops.G, B);
  } else {
    solver.emplace(Ar, ops.G, B, problem.effective_gauge(), problem.solver_tol);
  }
  const SaddleSolution sol = solver->solve(ops.R * f, g);

  PressureVelocity out;
  out.ut = ops.layout.extend_vector(sol.u, ops.prescribed);
  out.pw = sol.p;
  out.pn = sol.p + mob.P_c;
  return out;
}

SaturationStepper::SaturationStepper(const Problem& problem)
    : problem_(&problem),
      assembler_(problem.grid),
      P_(Vector::Constant(problem.grid.num_cells(), problem.grid.cell_area())) {}

// Phase updates closer than this are treated as equal up to round-off.
constexpr double kPhaseAgreement = 1e-12;

SaturationUpdate SaturationStepper::step(const Vector& sw, const Vector& sn, const Vector& ut, const Vector& xi,
                                         double dt) const {
  const Problem& pb = *problem_;
  const GridHierarchy& grid = pb.grid;
  const int nc = grid.num_cells();
  if (sw.size() != nc || sn.size() != nc) throw AssemblyError("step_saturation: saturation size mismatch");

  Vector fw, fn;
  cell_fractional_flows(sw, sn, pb.props, fw, fn);
  UpwindChoice& choice = choice_;
  UpwindOperators& up = ops_;
  upwind_directions(grid, ut, xi, fw, fn, choice);
  assembler_.assemble_from_flows(fw, fn, choice, up);

  SaturationUpdate out;
  out.applied = pb.sources;
  if (pb.sink == SinkTreatment::FractionalFlow) {
    for (int c = 0; c < nc; ++c) {
      const double qt = pb.sources.qw[c] + pb.sources.qn[c];
      if (qt < 0.0) {
        out.applied.qw[c] = fw[c] * qt;
        out.applied.qn[c] = fn[c] * qt;
      }
    }
  }
  const double scale = dt / pb.props.porosity;
  const Vector cap = up.B_c * xi;
  const Vector flux_w = up.B_w * ut;
  const Vector flux_n = up.B_n * ut;
  out.sw.resize(nc);
  out.sn.resize(nc);
  out.sn_direct.resize(nc);
  out.sn_complement.resize(nc);
  for (int c = 0; c < nc; ++c) {
    const double area = P_[c];
    const double w = sw[c] + scale * (out.applied.qw[c] * area + cap[c] - flux_w[c]) / area;
    const double n = sn[c] + scale * (out.applied.qn[c] * area - cap[c] - flux_n[c]) / area;
    out.sn_direct[c] = n;
    out.sn_complement[c] = 1.0 - w;
    if (std::abs((w + n) - 1.0) > kPhaseAgreement) {
      out.sw[c] = w;
      out.sn[c] = 1.0 - w;
    } else {
      out.sw[c] = 0.5 * (w + (1.0 - n));
      out.sn[c] = 0.5 * (n + (1.0 - w));
    }
  }
  return out;
}

TransportResult SaturationStepper::advance(const Vector& sw, const Vector& sn, const Vector& ut, const Vector& xi,
                                           double dt, SubstepMode mode, double safety, bool monitor) const {
  const Problem& pb = *problem_;
  const GridHierarchy& grid = pb.grid;
  int n = 1;
  if (mode == SubstepMode::Cfl) {
    const double limit = cfl_dt(grid, pb.props, ut, xi, safety, pb.sources.total());
    if (std::isfinite(limit)) n = std::max(1, static_cast<int>(std::ceil(dt / limit - 1e-12)));
  }
  const double dt_sub = dt / n;
  TransportResult res;
  res.stats.substeps = n;
  res.stats.dt_sub = dt_sub;
  res.stats.sw_min = sw.minCoeff();
  res.stats.sw_max = sw.maxCoeff();
  Vector cur_w = sw;
  Vector cur_n = sn;
  const double cscale = conservation_scale(grid, pb.props, dt_sub);
  for (int k = 0; k < n; ++k) {
    SaturationUpdate up = step(cur_w, cur_n, ut, xi, dt_sub);
    if (monitor) {
      const Vector rw = conservation_residual(grid, cur_w, up.sw, ut, xi, up.applied, dt_sub, pb.props,
                                              Phase::Wetting, cur_w, cur_n);
      const Vector rn = conservation_residual(grid, cur_n, up.sn, ut, xi, up.applied, dt_sub, pb.props,
                                              Phase::NonWetting, cur_w, cur_n);
      res.stats.conservation_w = std::max(res.stats.conservation_w, rw.cwiseAbs().maxCoeff() / cscale);
      res.stats.conservation_n = std::max(res.stats.conservation_n, rn.cwiseAbs().maxCoeff() / cscale);
      res.stats.dual_consistency =
          std::max(res.stats.dual_consistency, (up.sn_direct - up.sn_complement).cwiseAbs().maxCoeff());
      res.stats.bounds_violations +=
          static_cast<int>(bounds_check(up.sw).size() + bounds_check(up.sn).size());
    }
    res.stats.sw_min = std::min(res.stats.sw_min, up.sw.minCoeff());
    res.stats.sw_max = std::max(res.stats.sw_max, up.sw.maxCoeff());
    cur_w = std::move(up.sw);
    cur_n = std::move(up.sn);
  }
  res.sw = std::move(cur_w);
  res.sn = std::move(cur_n);
  return res;
}

SaturationUpdate step_saturation(const Problem& problem, const Vector& sw, const Vector& ut, const Vector& xi,
                                 double dt) {
  return SaturationStepper(problem).step(sw, Vector::Ones(sw.size()) - sw, ut, xi, dt);
}

PhaseFluxes phase_velocities(const GridHierarchy& grid, const FluidProps& props, const Vector& sw, const Vector& ut,
                             const Vector& xi) {
  const int ne = grid.num_edges();
  if (ut.size() != ne || xi.size() != ne || sw.size() != grid.num_cells()) {
    throw AssemblyError("phase_velocities: field size mismatch");
  }
  PhaseFluxes out;
  out.uw.resize(ne);
  out.un.resize(ne);
  for (int e = 0; e < ne; ++e) {
    const EdgeCells ec = grid.edge_cells(e);
    int cell;
    if (ec.minus < 0 || ec.plus < 0) {
      cell = ec.minus >= 0 ? ec.minus : ec.plus;
    } else {
      cell = ut[e] >= 0.0 ? ec.minus : ec.plus;
    }
    const PhasePair f = fractional_flows(sw[cell], props);
    const double coupling = f.w * f.n * xi[e];
    out.uw[e] = f.w * ut[e] - coupling;
    // Complement keeps the split exact in floating point.
    out.un[e] = ut[e] - out.uw[e];
  }
  return out;
}

const State* Trajectory::at(double t) const {
  for (const State& s : states) {
    if (std::abs(s.t - t) <= 1e-9 * std::max(1.0, std::abs(t))) return &s;
  }
  return nullptr;
}

RunResult run_fine(const Problem& problem, const TimeGrid& time, const State& initial, const RunOptions& options) {
  problem.validate();
  time.validate();
  const GridHierarchy& grid = problem.grid;
  if (initial.sw.size() != grid.num_cells()) throw ConfigError("initial state: size does not match the grid");

  FineOperators ops(problem);
  SaturationStepper stepper(problem);
  std::optional<SaddleSolver> saddle;
  RunResult result;
  State state = initial;
  if (state.sn.size() != grid.num_cells()) state.sn = Vector::Ones(grid.num_cells()) - state.sw;
  if (state.ut.size() != grid.num_edges()) state.ut = Vector::Zero(grid.num_edges());
  if (state.xi.size() != grid.num_edges()) state.xi = Vector::Zero(grid.num_edges());
  result.trajectory.states.push_back(state);

  const int nsteps = time.num_steps();
  for (int n = 1; n <= nsteps; ++n) {
    try {
      const MobilityOperators mob = assemble_mobility(grid, problem.medium, problem.props, state.sw, state.sn,
                                                      problem.capillary, problem.gravity, problem.quadrature);
      const Vector xi = step_capillary(problem, ops, mob);
      const PressureVelocity pv = step_pressure_velocity(problem, ops, mob, state, xi, &saddle);
      const TransportResult tr =
          stepper.advance(state.sw, state.sn, pv.ut, xi, time.dt, time.substep, time.cfl_safety, options.monitor);

      StepRecord rec;
      rec.step = n;
      rec.t = n * time.dt;
      rec.output = time.is_output_step(n);
      rec.substeps = tr.stats.substeps;
      rec.dt_sub = tr.stats.dt_sub;
      rec.conservation_w = tr.stats.conservation_w;
      rec.conservation_n = tr.stats.conservation_n;
      rec.dual_consistency = tr.stats.dual_consistency;
      rec.sw_min = tr.stats.sw_min;
      rec.sw_max = tr.stats.sw_max;
      rec.bounds_violations = tr.stats.bounds_violations;
      rec.stability_ratio = stability_ratio(grid, pv.ut, ops.qt, mob.A);

      state.t = rec.t;
      state.sw = tr.sw;
      state.sn = tr.sn;
      state.pw = pv.pw;
      state.pn = pv.pn;
      state.ut = pv.ut;
      state.xi = xi;
      result.report.steps.push_back(rec);
      if (rec.output) result.trajectory.states.push_back(state);
    } catch (const CompatibilityError& e) {
      throw CompatibilityError("step " + std::to_string(n) + ": " + e.what());
    } catch (const SolverError& e) {
      throw SolverError("step " + std::to_string(n) + ": " + e.what());
    } catch (const AssemblyError& e) {
      throw AssemblyError("step " + std::to_string(n) + ": " + e.what());
    }
  }
  return result;
}

}  // namespace mspflow
