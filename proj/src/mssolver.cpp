#include "mspflow/mssolver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mspflow/errors.hpp"
#include "mspflow/parallel.hpp"

namespace mspflow {

CoarseOperators::CoarseOperators(const MultiscaleSpace& space, const SparseMatrix& fine_C,
                                 const MobilityOperators& mob)
    : PhiT(space.Phi_v.transpose()), A(PhiT * mob.A * space.Phi_v), C(PhiT * fine_C * space.Phi_p) {}

Vector coarse_average(const GridHierarchy& grid, const Vector& field) {
  Vector sum = Vector::Zero(grid.num_coarse_cells());
  for (int c = 0; c < grid.num_cells(); ++c) sum[grid.coarse_of_cell(c)] += field[c];
  const double n = static_cast<double>(grid.block()) * grid.block();
  Vector out(grid.num_cells());
  for (int c = 0; c < grid.num_cells(); ++c) out[c] = sum[grid.coarse_of_cell(c)] / n;
  return out;
}

Vector ms_step_capillary(const Problem& problem, const MultiscaleSpace& space, const FineOperators& ops,
                         const CoarseOperators& cops, const MobilityOperators& mob, const Vector& sw) {
  const GridHierarchy& grid = problem.grid;
  if (!problem.capillary.enabled() && !problem.gravity.enabled) return Vector::Zero(grid.num_edges());
  Vector rhs = ops.st.C * coarse_average(grid, problem.capillary.pc_field(sw));
  if (problem.gravity.enabled) rhs -= (problem.props.rho_n - problem.props.rho_w) * mob.E;
  if (space.size() == 0) return Vector::Zero(grid.num_edges());
  const Vector coeffs = SpdSolver(cops.A, problem.solver_tol).solve(cops.PhiT * rhs);
  return space.Phi_v * coeffs;
}

CoarseSolution ms_step_pressure_velocity(const Problem& problem, const MultiscaleSpace& space,
                                         const FineOperators& ops, const CoarseOperators& cops,
                                         const MobilityOperators& mob, const State& state, const Vector& xi_H) {
  const GridHierarchy& grid = problem.grid;
  Vector fw, fn;
  cell_fractional_flows(state.sw, state.sn, problem.props, fw, fn);
  UpwindChoice choice;
  upwind_directions(grid, state.ut, state.xi, fw, fn, choice);
  UpwindOperators up;
  ops.upwind.assemble_from_flows(fw, fn, choice, up);

  Vector f = mob.A_n * xi_H;
  if (problem.gravity.enabled) f -= problem.props.rho_w * mob.E;
  const Vector g = space.Phi_p.transpose() * (ops.st.F_w + ops.st.F_n);
  const Vector pc = coarse_average(grid, problem.capillary.pc_field(state.sw));

  CoarseSolution out;
  if (space.size() == 0) {
    if (g.cwiseAbs().maxCoeff() > problem.solver_tol * (1.0 + g.lpNorm<1>())) {
      throw CompatibilityError("coarse solve: sources do not balance within a coarse cell");
    }
    out.u_coeffs = Vector::Zero(0);
    out.p_coarse = Vector::Zero(grid.num_coarse_cells());
  } else {
    const SparseMatrix Bt = space.Phi_p.transpose() * up.B_t * space.Phi_v;
    const SaddleSolution sol =
        SaddleSolver(cops.A, cops.C, Bt, problem.effective_gauge(), problem.solver_tol).solve(cops.PhiT * f, g);
    out.u_coeffs = sol.u;
    out.p_coarse = sol.p;
  }
  out.ut = space.Phi_v * out.u_coeffs;
  out.pw = space.Phi_p * out.p_coarse;
  out.pn = out.pw + pc;
  return out;
}

std::vector<int> nonconstant_source_cells(const GridHierarchy& grid, const Vector& qt) {
  std::vector<int> out;
  for (int k = 0; k < grid.num_coarse_cells(); ++k) {
    const std::vector<int> cells = cells_in(grid, grid.coarse_cell_rect(k));
    const double first = qt[cells.front()];
    for (const int c : cells) {
      if (qt[c] != first) {
        out.push_back(k);
        break;
      }
    }
  }
  return out;
}

Vector postprocess_velocity(const Problem& problem, const Vector& ut_H, const Vector& sw, const Vector& sn,
                            std::vector<int>* processed) {
  const GridHierarchy& grid = problem.grid;
  const Vector qt = problem.sources.total();
  const std::vector<int> targets = nonconstant_source_cells(grid, qt);
  if (processed) *processed = targets;
  Vector out = ut_H;
  if (targets.empty()) return out;
  const Vector kappa_inv = total_mobility_field(sw, sn, problem.medium, problem.props).cwiseInverse();
  // Without capillary or gravity the constraint row is the plain divergence,
  // so each coarse cell's boundary flux balances its sources up to round-off.
  const bool strict = !problem.capillary.enabled() && !problem.gravity.enabled;
  const double area = grid.cell_area();
  std::vector<LocalSolution> sols(targets.size());
  std::vector<std::unique_ptr<LocalMixedSolver>> solvers(targets.size());
  parallel_for(static_cast<int>(targets.size()), [&](int t) {
    const int k = targets[t];
    solvers[t] = std::make_unique<LocalMixedSolver>(grid, grid.coarse_cell_rect(k), kappa_inv, problem.solver_tol);
    const LocalMixedSolver& solver = *solvers[t];
    const auto& bnd = solver.boundary_edges();
    Vector bflux(static_cast<Eigen::Index>(bnd.size()));
    double outflow = 0.0;
    double scale = 0.0;
    for (size_t b = 0; b < bnd.size(); ++b) {
      bflux[b] = ut_H[bnd[b].edge];
      outflow += bnd[b].outward * grid.h() * bflux[b];
      scale += std::abs(grid.h() * bflux[b]);
    }
    Vector div(static_cast<Eigen::Index>(solver.cells().size()));
    double injected = 0.0;
    for (size_t c = 0; c < solver.cells().size(); ++c) {
      div[c] = qt[solver.cells()[c]] * area;
      injected += div[c];
      scale += std::abs(div[c]);
    }
    const double mismatch = outflow - injected;
    if (strict && std::abs(mismatch) > 1e-9 * (scale + 1e-300)) {
      throw SolverError("postprocess: coarse cell " + std::to_string(k) + " boundary flux misses its sources by " +
                        std::to_string(mismatch));
    }
    div.array() += mismatch / static_cast<double>(div.size());
    sols[t] = solver.solve(bflux, div);
  });
  for (size_t t = 0; t < targets.size(); ++t) {
    const auto& inner = solvers[t]->interior_edges();
    for (size_t e = 0; e < inner.size(); ++e) out[inner[e]] = sols[t].interior[e];
  }
  return out;
}

MultiscaleSpace build_space(const Problem& problem, const Vector& sw, const Vector& sn, const BasisConfig& config,
                            const std::string& cache_dir, EnrichmentState* state) {
  const Vector kappa = total_mobility_field(sw, sn, problem.medium, problem.props);
  MultiscaleSpace space;
  if (!cache_dir.empty() && load_space(problem.grid, cache_dir, kappa, config, space)) {
    if (state) *state = EnrichmentState{};
    return space;
  }
  BasisBuilder builder(problem.grid, kappa, problem.sources.total(), config);
  space = builder.build(state);
  if (!cache_dir.empty()) save_space(space, cache_dir);
  return space;
}

MsRunResult run_ms(const Problem& problem, const TimeGrid& time, const State& initial, const BasisConfig& basis,
                   const MsRunOptions& options) {
  problem.validate();
  time.validate();
  const GridHierarchy& grid = problem.grid;
  basis.validate(grid);
  if (!problem.bc.is_no_flow()) {
    throw ConfigError("ms: only no-flow boundaries are supported by the multiscale solver");
  }
  if (initial.sw.size() != grid.num_cells()) throw ConfigError("initial state: size does not match the grid");

  FineOperators ops(problem);
  SaturationStepper stepper(problem);
  MsRunResult result;
  State state = initial;
  if (state.sn.size() != grid.num_cells()) state.sn = Vector::Ones(grid.num_cells()) - state.sw;
  if (state.ut.size() != grid.num_edges()) state.ut = Vector::Zero(grid.num_edges());
  if (state.xi.size() != grid.num_edges()) state.xi = Vector::Zero(grid.num_edges());
  result.trajectory.states.push_back(state);

  auto rebuild = [&](const State& s) {
    EnrichmentState es;
    result.space = build_space(problem, s.sw, s.sn, basis, options.basis_cache, &es);
    std::vector<double> history = es.residual_history;
    if (es.iterations > 0 || !history.empty() || es.final_residual > 0.0) history.push_back(es.final_residual);
    result.report.enrichment_residuals.push_back(std::move(history));
    result.enrichment.push_back(std::move(es));
  };
  try {
    rebuild(state);
  } catch (const SolverError& e) {
    throw BasisError(std::string("initial basis build: ") + e.what());
  }

  const int nsteps = time.num_steps();
  for (int n = 1; n <= nsteps; ++n) {
    try {
      const MobilityOperators mob = assemble_mobility(grid, problem.medium, problem.props, state.sw, state.sn,
                                                      problem.capillary, problem.gravity, problem.quadrature);
      const CoarseOperators cops(result.space, ops.st.C, mob);
      const Vector xi = ms_step_capillary(problem, result.space, ops, cops, mob, state.sw);
      const CoarseSolution cs = ms_step_pressure_velocity(problem, result.space, ops, cops, mob, state, xi);
      const Vector ut = postprocess_velocity(problem, cs.ut, state.sw, state.sn);
      const TransportResult tr =
          stepper.advance(state.sw, state.sn, ut, xi, time.dt, time.substep, time.cfl_safety, options.monitor);

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
      rec.stability_ratio = stability_ratio(grid, ut, ops.qt, mob.A);

      state.t = rec.t;
      state.sw = tr.sw;
      state.sn = tr.sn;
      state.pw = cs.pw;
      state.pn = cs.pn;
      state.ut = ut;
      state.xi = xi;
      if (options.reference) {
        if (const State* ref = options.reference->at(rec.t)) {
          rec.e_s = l2_error(state.sw, ref->sw, grid.cell_area());
          rec.flux_sign = flux_sign_agreement(grid, ref->ut, state.ut);
        }
      }
      for (const double tr_time : time.rebuild_times) {
        if (std::abs(tr_time - rec.t) <= 1e-9 * std::max(1.0, std::abs(tr_time)) && n < nsteps) {
          rebuild(state);
          rec.rebuild = true;
          result.report.rebuild_steps.push_back(n);
          break;
        }
      }
      result.report.steps.push_back(rec);
      if (rec.output) result.trajectory.states.push_back(state);
    } catch (const CompatibilityError& e) {
      throw CompatibilityError("step " + std::to_string(n) + ": " + e.what());
    } catch (const SolverError& e) {
      throw SolverError("step " + std::to_string(n) + ": " + e.what());
    } catch (const AssemblyError& e) {
      throw AssemblyError("step " + std::to_string(n) + ": " + e.what());
    } catch (const BasisError& e) {
      throw BasisError("step " + std::to_string(n) + ": " + e.what());
    }
  }
  return result;
}

}  // namespace mspflow
