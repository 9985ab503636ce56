#include "mspflow/acceptance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <tuple>
#include <unordered_map>

#include "mspflow/io.hpp"

namespace mspflow {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

/// Smooth nonuniform saturation in (0.15, 0.85) for the small structural problems.
Vector wavy_saturation(const GridHierarchy& grid) {
  Vector s(grid.num_cells());
  for (int c = 0; c < grid.num_cells(); ++c) {
    s[c] = 0.5 + 0.35 * std::sin(2.1 * grid.cell_i(c) + 1.3 * grid.cell_j(c));
  }
  return s;
}

/// The configured fluids and medium generator on a smaller grid.
RunConfig small_config(const RunConfig& config, int n, int block) {
  RunConfig c = config;
  c.grid.nx = n;
  c.grid.ny = n;
  c.grid.block = block;
  c.medium.file.clear();
  if (c.wells.kind == WellConfig::Kind::Custom) c.wells.kind = WellConfig::Kind::FivePoint;
  c.time.output_every = 1;
  return c;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(const RunReport& report) {
    for (const StepRecord& r : report.steps) {
      lo = std::min(lo, r.sw_min);
      hi = std::max(hi, r.sw_max);
    }
  }
};

bool strictly_decreasing(const std::vector<double>& v) {
  for (size_t k = 1; k < v.size(); ++k) {
    if (!(v[k] < v[k - 1])) return false;
  }
  return v.size() >= 2;
}

double min_flux_sign(const ErrorSeries& s) {
  double m = 1.0;
  for (const double f : s.flux_sign) m = std::min(m, f);
  return m;
}

double max_error(const ErrorSeries& s) {
  double m = 0.0;
  for (const double e : s.e_s) m = std::max(m, e);
  return m;
}

/// Per-cell oracle against the solver's explicit update on a small grid with
/// capillary flux, no substepping.
CriterionResult oracle_transport(const RunConfig& config) {
  RunConfig c = small_config(config, 8, 4);
  c.time.dt = 1.0;
  c.time.T = 10.0;
  c.time.substep = SubstepMode::None;
  c.time.rebuild_times.clear();
  c.capillary.kind = CapillaryModel::Kind::Linear;
  c.capillary.entry_pressure = 1e-5;
  const Problem p = make_problem(c);
  const RunResult run = run_fine(p, c.time, initial_state(p, wavy_saturation(p.grid)), {false});
  double diff = 0.0;
  double xi_max = 0.0;
  const auto& states = run.trajectory.states;
  for (size_t k = 0; k + 1 < states.size(); ++k) {
    const Vector s = oracle_saturation_step(p, states[k].sw, states[k + 1].ut, states[k + 1].xi, c.time.dt);
    diff = std::max(diff, (s - states[k + 1].sw).cwiseAbs().maxCoeff());
    xi_max = std::max(xi_max, states[k + 1].xi.cwiseAbs().maxCoeff());
  }
  const bool pass = diff <= 1e-13 && states.size() == 11 && xi_max > 0.0;
  return {7, "", pass,
          "(a) 8x8, 10 steps with capillary flux (max |xi| " + fmt(xi_max) + "): max |S - S_oracle| = " + fmt(diff) +
              " (<= 1e-13)"};
}

/// Full-snapshot space against the fine solve for the mobility it was built with.
CriterionResult full_snapshot_exactness(const RunConfig& config) {
  const RunConfig c = small_config(config, 20, 5);
  Problem p = make_problem(c);
  const GridHierarchy& grid = p.grid;
  p.sources = zero_sources(grid);
  const int last = grid.num_coarse_cells() - 1;
  for (int cell = 0; cell < grid.num_cells(); ++cell) {
    const int k = grid.coarse_of_cell(cell);
    if (k == 0) p.sources.qw[cell] = 1.0;
    if (k == last) p.sources.qw[cell] = -1.0;
  }
  const Vector sw = wavy_saturation(grid);
  const Vector sn = Vector::Ones(sw.size()) - sw;
  const FineOperators ops(p);
  const MobilityOperators mob =
      assemble_mobility(grid, p.medium, p.props, sw, sn, p.capillary, p.gravity, p.quadrature);
  State st = initial_state(p, sw);
  const PressureVelocity fine = step_pressure_velocity(p, ops, mob, st, Vector::Zero(grid.num_edges()));
  BasisConfig bc = basis_for(c, "1+0");
  bc.full_snapshot = true;
  const Vector qt = p.sources.total();
  const BasisBuilder builder(grid, total_mobility_field(sw, sn, p.medium, p.props), qt, bc);
  const MultiscaleSpace space = builder.offline_space();
  const CoarseSolve ms = coarse_darcy_solve(grid, space, mob.A, qt, p.solver_tol);
  const double diff = (ms.u_fine - fine.ut).cwiseAbs().maxCoeff();
  return {7, "", diff <= 1e-8,
          "(b) 20x20/5 full snapshots: max |u_ms - u_fine| = " + fmt(diff) + " (<= 1e-8, max |u| " +
              fmt(fine.ut.cwiseAbs().maxCoeff()) + ")"};
}

/// Block size 1 makes the multiscale space the fine space.
CriterionResult unit_block_run(const RunConfig& config) {
  const RunConfig c = small_config(config, 20, 1);
  const Problem p = make_problem(c);
  const State init = initial_state(p, c.initial_saturation());
  const RunResult fine = run_fine(p, c.time, init, {false});
  MsRunOptions o;
  o.monitor = false;
  o.reference = &fine.trajectory;
  const MsRunResult ms = run_ms(p, c.time, init, basis_for(c, "1+0"), o);
  double e = 0.0;
  int count = 0;
  for (const StepRecord& r : ms.report.steps) {
    if (r.e_s) {
      e = std::max(e, *r.e_s);
      ++count;
    }
  }
  return {7, "", e <= 1e-8 && count == c.time.num_steps(),
          "(c) 20x20 block 1, " + std::to_string(count) + " steps: max e_s = " + fmt(e) + " (<= 1e-8)"};
}

CriterionResult structural_invariants(const RunConfig& config) {
  const RunConfig c = small_config(config, 20, 5);
  const Problem p = make_problem(c);
  const GridHierarchy& grid = p.grid;
  const double h = grid.h();
  const double area = grid.cell_area();
  const Vector sw = wavy_saturation(grid);
  const Vector sn = Vector::Ones(sw.size()) - sw;
  const FineOperators ops(p);
  std::vector<std::string> notes;
  bool pass = true;
  auto check = [&](bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(what + (ok ? "" : " FAILED"));
  };

  // Constraint row against the divergence with capillary and gravity off.
  {
    const MobilityOperators mob =
        assemble_mobility(grid, p.medium, p.props, sw, sn, p.capillary, p.gravity, p.quadrature);
    const State st = initial_state(p, sw);
    State moved = st;
    moved.ut = step_pressure_velocity(p, ops, mob, st, Vector::Zero(grid.num_edges())).ut;
    Vector fw, fn;
    cell_fractional_flows(sw, sn, p.props, fw, fn);
    UpwindChoice choice;
    upwind_directions(grid, moved.ut, moved.xi, fw, fn, choice);
    UpwindOperators up;
    ops.upwind.assemble_from_flows(fw, fn, choice, up);
    const SparseMatrix diff = up.B_t - SparseMatrix(ops.st.C.transpose());
    const double d = diff.nonZeros() ? diff.coeffs().cwiseAbs().maxCoeff() : 0.0;
    check(d == 0.0, "B_t - C^T = " + fmt(d));
  }

  BasisConfig bc = basis_for(c, "2+3");
  bc.tol = 0.0;
  const Vector kappa = total_mobility_field(sw, sn, p.medium, p.props);
  const Vector qt = p.sources.total();
  const BasisBuilder builder(grid, kappa, qt, bc);

  // Snapshot divergence is +alpha on K_{i,1} and -alpha on K_{i,2}.
  double compat = 0.0;
  bool ascending = true;
  for (size_t i = 0; i < builder.snapshots().size(); ++i) {
    const EdgeSnapshots& snap = builder.snapshots()[i];
    const CoarseNeighborhood nb = neighborhood(grid, snap.coarse_edge);
    std::unordered_map<int, int> row;
    for (size_t r = 0; r < snap.edges.size(); ++r) row[snap.edges[r]] = static_cast<int>(r);
    for (Eigen::Index j = 0; j < snap.psi.cols(); ++j) {
      for (const int cell : nb.cells) {
        double div = 0.0;
        for (const CellEdge& ce : grid.cell_edges(cell)) {
          const auto it = row.find(ce.edge);
          if (it != row.end()) div += ce.outward * h * snap.psi(it->second, j);
        }
        const double expected = (grid.coarse_of_cell(cell) == nb.k1 ? 1.0 : -1.0) * snap.alpha;
        compat = std::max(compat, std::abs(div / area - expected) / std::max(1.0, std::abs(snap.alpha)));
      }
    }
    const auto& ev = builder.spectra()[i].eigenvalues;
    ascending = ascending && std::is_sorted(ev.begin(), ev.end());
  }
  check(compat <= 1e-12, "snapshot compatibility " + fmt(compat));
  check(ascending, std::string("eigenvalues ") + (ascending ? "ascending" : "not ascending"));

  EnrichmentState es;
  const MultiscaleSpace space = builder.build(&es);

  // Galerkin residual of the coarse solve in the enriched space.
  {
    const CoarseSolve cs = coarse_darcy_solve(grid, space, builder.mass(), qt, p.solver_tol);
    const Vector r = space.Phi_v.transpose() * (builder.mass() * cs.u_fine - ops.st.C * cs.p_fine);
    const Vector g = space.Phi_p.transpose() * (qt * area);
    const double bound = p.solver_tol * (1.0 + g.norm());
    check(r.norm() <= bound, "Galerkin residual " + fmt(r.norm()) + " (<= " + fmt(bound) + ")");
  }

  // Every velocity basis function has a divergence constant on each coarse cell.
  {
    const Eigen::MatrixXd div = Eigen::MatrixXd(SparseMatrix(ops.st.C.transpose()) * space.Phi_v) / area;
    double spread = 0.0;
    for (Eigen::Index j = 0; j < div.cols(); ++j) {
      const double scale = std::max(1.0, div.col(j).cwiseAbs().maxCoeff());
      std::vector<double> lo(grid.num_coarse_cells(), std::numeric_limits<double>::infinity());
      std::vector<double> hi(grid.num_coarse_cells(), -std::numeric_limits<double>::infinity());
      for (int cell = 0; cell < grid.num_cells(); ++cell) {
        const int k = grid.coarse_of_cell(cell);
        lo[k] = std::min(lo[k], div(cell, j));
        hi[k] = std::max(hi[k], div(cell, j));
      }
      for (int k = 0; k < grid.num_coarse_cells(); ++k) spread = std::max(spread, (hi[k] - lo[k]) / scale);
    }
    check(spread <= 1e-10, "coarse divergence spread " + fmt(spread));
  }

  // Enrichment never increases the global residual.
  {
    std::vector<double> hist = es.residual_history;
    hist.push_back(es.final_residual);
    bool monotone = hist.size() == static_cast<size_t>(bc.online) + 1;
    for (size_t k = 1; k < hist.size(); ++k) monotone = monotone && hist[k] <= hist[k - 1];
    std::string values;
    for (const double v : hist) values += (values.empty() ? "" : " ") + fmt(v);
    check(monotone, "||R|| over " + bc.label() + ": " + values);
  }

  std::string detail = "20x20/5: ";
  for (size_t k = 0; k < notes.size(); ++k) detail += (k ? "; " : "") + notes[k];
  return {8, "Structural invariants", pass, detail};
}

}  // namespace

State swapped_state(const State& s) {
  State t = s;
  std::swap(t.sw, t.sn);
  std::swap(t.pw, t.pn);
  return t;
}

double swap_deviation(const Trajectory& original, const Trajectory& swapped) {
  double m = 0.0;
  for (const State& s : original.states) {
    const State* o = swapped.at(s.t);
    if (!o) continue;
    m = std::max(m, (s.sw - o->sn).cwiseAbs().maxCoeff());
  }
  return m;
}

Vector oracle_saturation_step(const Problem& problem, const Vector& sw, const Vector& ut, const Vector& xi,
                              double dt) {
  const GridHierarchy& grid = problem.grid;
  const FluidProps& fp = problem.props;
  const int nc = grid.num_cells();
  const double h = grid.h();
  auto kr = [&](double s, double own, double other) {
    const double se = std::clamp((s - own) / (1.0 - own - other), 0.0, 1.0);
    return std::pow(se, fp.kr_exponent);
  };
  Vector fw(nc), fn(nc);
  for (int c = 0; c < nc; ++c) {
    const double lw = kr(sw[c], fp.s_rw, fp.s_rn) / fp.mu_w;
    const double ln = kr(1.0 - sw[c], fp.s_rn, fp.s_rw) / fp.mu_n;
    fw[c] = lw / (lw + ln);
    fn[c] = ln / (lw + ln);
  }
  Vector out(nc);
  for (int c = 0; c < nc; ++c) {
    const double qt = problem.sources.qw[c] + problem.sources.qn[c];
    double qw = problem.sources.qw[c];
    if (problem.sink == SinkTreatment::FractionalFlow && qt < 0.0) qw = fw[c] * qt;
    double outflow = 0.0;
    for (const CellEdge& face : grid.cell_edges(c)) {
      const int e = face.edge;
      const EdgeCells ec = grid.edge_cells(e);
      int up_w = c;
      int up_n = c;
      if (ec.minus >= 0 && ec.plus >= 0) {
        const double fw_avg = 0.5 * (fw[ec.minus] + fw[ec.plus]);
        const double fn_avg = 0.5 * (fn[ec.minus] + fn[ec.plus]);
        const double prod_avg = 0.5 * (fw[ec.minus] * fn[ec.minus] + fw[ec.plus] * fn[ec.plus]);
        up_w = fw_avg * ut[e] - prod_avg * xi[e] >= 0.0 ? ec.minus : ec.plus;
        up_n = fn_avg * ut[e] + prod_avg * xi[e] >= 0.0 ? ec.minus : ec.plus;
      }
      const double phase_flux = fw[up_w] * ut[e] - fw[up_w] * fn[up_n] * xi[e];
      outflow += face.outward * h * phase_flux;
    }
    out[c] = sw[c] + dt / fp.porosity * (qw - outflow / grid.cell_area());
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  return std::string(r.pass ? "PASS" : "FAIL") + " [" + std::to_string(r.id) + "] " + r.title + ": " + r.detail;
}

std::vector<CriterionResult> run_acceptance(const RunConfig& config, const AcceptanceOptions& options,
                                            const std::function<void(const CriterionResult&)>& on_result) {
  auto log = [&](const std::string& m) {
    if (options.log) options.log(m);
  };
  RunConfig cfg = config;
  cfg.time.output_every = 1;
  const Problem problem = make_problem(cfg);
  const Problem swapped = problem.swapped();
  const State init = initial_state(problem, cfg.initial_saturation());
  TimeGrid tref = cfg.time;
  tref.dt = cfg.sweep.reference_dt;
  tref.rebuild_times.clear();

  Range range;
  log("fine reference");
  const RunResult fine = run_fine(problem, tref, init, {true});
  range.add(fine.report);
  log("fine reference, phases relabeled");
  const RunResult fine_swapped = run_fine(swapped, tref, swapped_state(init), {false});

  std::map<std::tuple<int, double, std::string>, CaseResult> cases;
  auto ms_case = [&](int block, double dt, const std::string& label, bool monitor = false) -> const CaseResult& {
    const auto key = std::make_tuple(block ? block : cfg.grid.block, dt > 0.0 ? dt : cfg.time.dt, label);
    auto it = cases.find(key);
    if (it == cases.end()) {
      log("multiscale " + label + " block " + std::to_string(std::get<0>(key)) + " dt " + fmt(std::get<1>(key)));
      CaseResult r = run_case(cfg, {label, block, dt, label}, fine.trajectory, monitor);
      range.add(r.run.report);
      // Only the monitored runs are compared field by field later.
      if (!monitor) r.run.trajectory.states.erase(r.run.trajectory.states.begin(), r.run.trajectory.states.end() - 1);
      it = cases.emplace(key, std::move(r)).first;
    }
    return it->second;
  };

  const CaseResult& ms1 = ms_case(0, 0.0, "1+0", true);
  log("multiscale 1+0, phases relabeled");
  MsRunOptions quiet;
  quiet.monitor = false;
  const MsRunResult ms1_swapped = run_ms(swapped, cfg.time, swapped_state(init), basis_for(cfg, "1+0"), quiet);

  std::vector<const CaseResult*> dt_runs, h_runs, basis_runs;
  for (const MsCase& c : dt_cases(cfg)) dt_runs.push_back(&ms_case(c.block, c.dt, c.bases));
  for (const MsCase& c : h_cases(cfg)) h_runs.push_back(&ms_case(c.block, c.dt, c.bases));
  for (const MsCase& c : basis_cases(cfg)) basis_runs.push_back(&ms_case(c.block, c.dt, c.bases));
  const CaseResult& b30 = ms_case(0, 0.0, "3+0");
  const CaseResult& b60 = ms_case(0, 0.0, "6+0");
  const CaseResult& b31 = ms_case(0, 0.0, "3+1");
  const CaseResult& b21 = ms_case(0, 0.0, "2+1");

  std::vector<CriterionResult> results;
  auto emit = [&](CriterionResult r) {
    if (on_result) on_result(r);
    results.push_back(std::move(r));
  };
  const std::string setup = std::to_string(cfg.grid.nx) + "x" + std::to_string(cfg.grid.ny) + ", block " +
                            std::to_string(cfg.grid.block) + ", dt " + fmt(cfg.time.dt);

  {
    const double cf = fine.report.max_conservation();
    const double cm = ms1.run.report.max_conservation();
    emit({1, "Conservation", std::max(cf, cm) <= 1e-10,
          setup + ", every step: fine " + fmt(cf) + ", ms 1+0 " + fmt(cm) + " (<= 1e-10)"});
  }
  {
    const double df = fine.report.max_dual_consistency();
    const double dm = ms1.run.report.max_dual_consistency();
    const double sf = swap_deviation(fine.trajectory, fine_swapped.trajectory);
    const double sm = swap_deviation(ms1.run.trajectory, ms1_swapped.trajectory);
    emit({2, "Dual consistency and phase-swap unbiasedness", std::max({df, dm, sf, sm}) <= 1e-12,
          "dual fine " + fmt(df) + ", ms " + fmt(dm) + "; swap fine " + fmt(sf) + ", ms " + fmt(sm) + " (<= 1e-12)"});
  }
  {
    const int vf = fine.report.total_bounds_violations();
    const int vm = ms1.run.report.total_bounds_violations();
    const bool in_range = range.lo >= -1e-12 && range.hi <= 1.0 + 1e-12;
    emit({3, "Bounds preservation", vf == 0 && vm == 0 && in_range,
          "monitored violations fine " + std::to_string(vf) + ", ms " + std::to_string(vm) +
              "; S_w range over all " + std::to_string(cases.size() + 2) + " runs [" + fmt(range.lo) + ", " +
              fmt(range.hi) + "]"});
  }
  {
    std::vector<std::pair<double, double>> pts;
    std::string all;
    const std::vector<MsCase> cs = dt_cases(cfg);
    for (size_t k = 0; k < cs.size(); ++k) {
      const ErrorSeries& s = dt_runs[k]->series;
      all += (all.empty() ? "" : ", ") + cs[k].label + " " + fmt(s.final_error());
      if (cs[k].dt != cfg.sweep.reference_dt) pts.emplace_back(cs[k].dt, s.final_error());
    }
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<double> errs;
    for (const auto& pt : pts) errs.push_back(pt.second);
    emit({4, "Time step convergence", strictly_decreasing(errs),
          cfg.sweep.dt_bases + ", final e_s: " + all + " (strictly decreasing for dt > reference)"});
  }
  {
    std::vector<std::pair<int, double>> pts;
    const std::vector<MsCase> cs = h_cases(cfg);
    for (size_t k = 0; k < cs.size(); ++k) pts.emplace_back(cs[k].block, h_runs[k]->series.final_error());
    std::sort(pts.begin(), pts.end());
    std::vector<double> errs;
    std::string all;
    for (const auto& [b, e] : pts) {
      errs.insert(errs.begin(), e);
      all += (all.empty() ? "" : ", ") + ("n=" + std::to_string(b)) + " " + fmt(e);
    }
    const double ratio = pts.size() >= 2 ? pts.back().second / pts.front().second : 0.0;
    emit({5, "Coarse mesh convergence", strictly_decreasing(errs) && ratio >= 3.0,
          cfg.sweep.h_bases + ", final e_s: " + all + "; ratio " + fmt(ratio) + " (>= 3)"});
  }
  {
    const double e30 = b30.series.final_error();
    const double e60 = b60.series.final_error();
    const double e31 = b31.series.final_error();
    const bool a = e60 < e30;
    const bool b = e31 < e30;
    const bool c = e31 <= 1.2 * e60;
    emit({6, "Basis enrichment", a && b && c,
          "final e_s 3+0 " + fmt(e30) + ", 6+0 " + fmt(e60) + ", 3+1 " + fmt(e31) + "; 6+0 < 3+0 " +
              (a ? "yes" : "no") + ", 3+1 < 3+0 " + (b ? "yes" : "no") + ", 3+1 <= 1.2 (6+0) " + (c ? "yes" : "no")});
  }
  {
    log("oracle checks");
    const CriterionResult a = oracle_transport(cfg);
    const CriterionResult b = full_snapshot_exactness(cfg);
    const CriterionResult c = unit_block_run(cfg);
    emit({7, "Oracle equivalence", a.pass && b.pass && c.pass, a.detail + "; " + b.detail + "; " + c.detail});
  }
  log("structural invariants");
  emit(structural_invariants(cfg));
  {
    const double fmin = min_flux_sign(b21.series);
    emit({9, "Flux-sign agreement", fmin >= 0.95 && !b21.series.flux_sign.empty(),
          "2+1, min over " + std::to_string(b21.series.flux_sign.size()) + " steps " + fmt(fmin) + ", final " +
              fmt(b21.series.final_flux_sign()) + " (>= 0.95); max e_s " + fmt(max_error(b21.series))});
  }

  if (!options.out_dir.empty()) {
    ensure_writable_dir(options.out_dir);
    const std::filesystem::path dir(options.out_dir);
    // Runs are shared between sweeps, so columns take the sweep's own case labels.
    auto table = [&](const std::string& name, const std::vector<MsCase>& cs,
                     const std::vector<const CaseResult*>& runs) {
      std::vector<ErrorSeries> series;
      for (size_t k = 0; k < runs.size(); ++k) {
        series.push_back(runs[k]->series);
        series.back().label = cs[k].label;
      }
      write_error_table((dir / name).string(), series);
    };
    table("sweep_dt.csv", dt_cases(cfg), dt_runs);
    table("sweep_h.csv", h_cases(cfg), h_runs);
    table("sweep_bases.csv", basis_cases(cfg), basis_runs);
    std::ofstream out(dir / "acceptance.txt");
    for (const CriterionResult& r : results) out << format_result(r) << '\n';
  }
  return results;
}

}  // namespace mspflow
