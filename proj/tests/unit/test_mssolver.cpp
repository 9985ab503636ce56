#include <gtest/gtest.h>

#include "mspflow/acceptance.hpp"
#include "mspflow/config.hpp"
#include "mspflow/errors.hpp"
#include "mspflow/mssolver.hpp"

using namespace mspflow;

namespace {

RunConfig small(int n, int block) {
  RunConfig c;
  c.grid.nx = n;
  c.grid.ny = n;
  c.grid.block = block;
  c.time.T = 2000.0;
  c.time.rebuild_times = {1000.0};
  return c;
}

}  // namespace

TEST(NonconstantSourceCells, FindsWellCells) {
  const Problem p = make_problem(small(20, 5));
  const std::vector<int> cells = nonconstant_source_cells(p.grid, p.sources.total());
  // Four corner injectors and the central sink, which straddles four coarse cells.
  EXPECT_EQ(cells.size(), 8u);
  const Problem unit = make_problem(small(20, 1));
  EXPECT_TRUE(nonconstant_source_cells(unit.grid, unit.sources.total()).empty());
}

TEST(PostprocessVelocity, BalancesEveryFineCellInProcessedCoarseCells) {
  const RunConfig c = small(20, 5);
  const Problem p = make_problem(c);
  const State init = initial_state(p, c.initial_saturation());
  const FineOperators ops(p);
  const MultiscaleSpace space = build_space(p, init.sw, init.sn, basis_for(c, "2+0"), "");
  const MobilityOperators mob =
      assemble_mobility(p.grid, p.medium, p.props, init.sw, init.sn, p.capillary, p.gravity);
  const CoarseOperators cops(space, ops.st.C, mob);
  const CoarseSolution cs =
      ms_step_pressure_velocity(p, space, ops, cops, mob, init, Vector::Zero(p.grid.num_edges()));
  std::vector<int> processed;
  const Vector u = postprocess_velocity(p, cs.ut, init.sw, init.sn, &processed);
  ASSERT_FALSE(processed.empty());
  const Vector div = ops.st.C.transpose() * u;
  const Vector q = p.sources.total() * p.grid.cell_area();
  for (const int k : processed) {
    for (const int cell : cells_in(p.grid, p.grid.coarse_cell_rect(k))) {
      EXPECT_NEAR(div[cell], q[cell], 1e-10 * (1.0 + std::abs(q[cell])));
    }
  }
}

TEST(RunMs, ConservesAndStaysInBounds) {
  const RunConfig c = small(20, 5);
  const Problem p = make_problem(c);
  const MsRunResult r = run_ms(p, c.time, initial_state(p, c.initial_saturation()), basis_for(c, "2+1"));
  EXPECT_EQ(r.report.steps.size(), 20u);
  EXPECT_LE(r.report.max_conservation(), 1e-10);
  EXPECT_LE(r.report.max_dual_consistency(), 1e-12);
  EXPECT_EQ(r.report.total_bounds_violations(), 0);
  ASSERT_EQ(r.report.rebuild_steps.size(), 1u);
  EXPECT_EQ(r.report.rebuild_steps[0], 10);
  EXPECT_EQ(r.report.enrichment_residuals.size(), 2u);
}

TEST(RunMs, UnitBlockMatchesFineRun) {
  RunConfig c = small(10, 1);
  c.time.rebuild_times.clear();
  const Problem p = make_problem(c);
  const State init = initial_state(p, c.initial_saturation());
  const RunResult fine = run_fine(p, c.time, init, {false});
  MsRunOptions o;
  o.reference = &fine.trajectory;
  o.monitor = false;
  const MsRunResult ms = run_ms(p, c.time, init, basis_for(c, "1+0"), o);
  ASSERT_TRUE(ms.report.steps.back().e_s.has_value());
  EXPECT_LE(*ms.report.steps.back().e_s, 1e-8);
}

TEST(RunMs, PhaseRelabelingIsExact) {
  const RunConfig c = small(20, 5);
  const Problem p = make_problem(c);
  const State init = initial_state(p, c.initial_saturation());
  MsRunOptions o;
  o.monitor = false;
  const MsRunResult a = run_ms(p, c.time, init, basis_for(c, "1+0"), o);
  const MsRunResult b = run_ms(p.swapped(), c.time, swapped_state(init), basis_for(c, "1+0"), o);
  EXPECT_EQ(swap_deviation(a.trajectory, b.trajectory), 0.0);
}

TEST(RunMs, RejectsOpenBoundaries) {
  const RunConfig c = small(10, 5);
  Problem p = make_problem(c);
  p.bc.dirichlet.assign(p.grid.num_edges(), 0);
  p.bc.dirichlet[0] = 1;
  EXPECT_THROW(run_ms(p, c.time, initial_state(p, 0.5), basis_for(c, "1+0")), ConfigError);
}
