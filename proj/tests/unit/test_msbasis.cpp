#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "mspflow/config.hpp"
#include "mspflow/errors.hpp"
#include "mspflow/msbasis.hpp"
#include "mspflow/pimpes.hpp"

using namespace mspflow;

namespace {

struct Fixture {
  Problem p;
  Vector kappa;
  Vector qt;
};

Fixture setup(int n, int block) {
  RunConfig c;
  c.grid.nx = n;
  c.grid.ny = n;
  c.grid.block = block;
  Fixture s{make_problem(c), {}, {}};
  Vector sw(s.p.grid.num_cells());
  for (int k = 0; k < sw.size(); ++k) sw[k] = 0.5 + 0.3 * std::sin(0.37 * k);
  s.kappa = total_mobility_field(sw, s.p.medium, s.p.props);
  s.qt = s.p.sources.total();
  return s;
}

BasisConfig recipe(const std::string& label) {
  BasisConfig b = parse_basis_label(label);
  b.oversample_layers = 3;
  return b;
}

}  // namespace

TEST(BasisLabel, ParsesAndRejects) {
  const BasisConfig b = parse_basis_label("3+1");
  EXPECT_EQ(b.offline, 3);
  EXPECT_EQ(b.online, 1);
  EXPECT_EQ(b.label(), "3+1");
  EXPECT_THROW(parse_basis_label("3"), ConfigError);
  EXPECT_THROW(parse_basis_label("a+1"), ConfigError);
  const GridHierarchy g = GridHierarchy::build(20, 20, 5, 1.0, 1.0);
  EXPECT_THROW(parse_basis_label("6+0").validate(g), ConfigError);
}

TEST(LocalMixedSolver, MatchesPrescribedDivergence) {
  const Fixture s = setup(10, 5);
  const LocalMixedSolver solver(s.p.grid, s.p.grid.coarse_cell_rect(0), s.kappa.cwiseInverse());
  Vector bflux = Vector::Zero(static_cast<Eigen::Index>(solver.boundary_edges().size()));
  bflux[0] = 1.0;
  double out = 0.0;
  for (size_t b = 0; b < solver.boundary_edges().size(); ++b) {
    out += solver.boundary_edges()[b].outward * s.p.grid.h() * bflux[b];
  }
  const Vector div = Vector::Constant(static_cast<Eigen::Index>(solver.cells().size()), out / 25.0);
  const LocalSolution sol = solver.solve(bflux, div);
  // Rebuild the per-cell divergence from interior and boundary fluxes.
  Vector u = Vector::Zero(s.p.grid.num_edges());
  for (size_t k = 0; k < solver.interior_edges().size(); ++k) u[solver.interior_edges()[k]] = sol.interior[k];
  for (size_t b = 0; b < solver.boundary_edges().size(); ++b) u[solver.boundary_edges()[b].edge] = bflux[b];
  for (size_t c = 0; c < solver.cells().size(); ++c) {
    double d = 0.0;
    for (const CellEdge& ce : s.p.grid.cell_edges(solver.cells()[c])) d += ce.outward * s.p.grid.h() * u[ce.edge];
    EXPECT_NEAR(d, div[c], 1e-13);
  }
}

TEST(BasisBuilder, SnapshotsAndSpectraAreConsistent) {
  const Fixture s = setup(20, 5);
  const BasisBuilder b(s.p.grid, s.kappa, s.qt, recipe("3+0"));
  ASSERT_EQ(b.snapshots().size(), b.spectra().size());
  for (size_t i = 0; i < b.snapshots().size(); ++i) {
    const EdgeSnapshots& snap = b.snapshots()[i];
    EXPECT_EQ(snap.psi.cols(), static_cast<Eigen::Index>(snap.trace.size()));
    const auto& ev = b.spectra()[i].eigenvalues;
    EXPECT_TRUE(std::is_sorted(ev.begin(), ev.end()));
    EXPECT_EQ(b.spectra()[i].count, 3);
  }
  const MultiscaleSpace space = b.offline_space();
  EXPECT_EQ(space.size(), 3 * static_cast<int>(b.snapshots().size()));
  EXPECT_EQ(space.Phi_p.cols(), s.p.grid.num_coarse_cells());
}

TEST(BasisBuilder, FullSnapshotSpaceReproducesFineFluxForCoarseConstantSources) {
  Fixture s = setup(10, 5);
  const GridHierarchy& g = s.p.grid;
  s.p.sources = zero_sources(g);
  for (int c = 0; c < g.num_cells(); ++c) {
    if (g.coarse_of_cell(c) == 0) s.p.sources.qw[c] = 1.0;
    if (g.coarse_of_cell(c) == 3) s.p.sources.qw[c] = -1.0;
  }
  s.qt = s.p.sources.total();
  const Vector sw = Vector::Constant(g.num_cells(), 0.5);
  const MobilityOperators mob = assemble_mobility(g, s.p.medium, s.p.props, sw, s.p.capillary, s.p.gravity);
  const FineOperators ops(s.p);
  const PressureVelocity fine =
      step_pressure_velocity(s.p, ops, mob, initial_state(s.p, sw), Vector::Zero(g.num_edges()));
  BasisConfig cfg = recipe("1+0");
  cfg.full_snapshot = true;
  const BasisBuilder b(g, total_mobility_field(sw, s.p.medium, s.p.props), s.qt, cfg);
  const CoarseSolve ms = coarse_darcy_solve(g, b.offline_space(), mob.A, s.qt);
  EXPECT_LE((ms.u_fine - fine.ut).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(BasisBuilder, EnrichmentReducesResidual) {
  const Fixture s = setup(20, 5);
  const BasisBuilder b(s.p.grid, s.kappa, s.qt, recipe("1+2"));
  EnrichmentState st;
  const MultiscaleSpace space = b.build(&st);
  EXPECT_EQ(space.online_iterations, 2);
  ASSERT_EQ(st.residual_history.size(), 2u);
  EXPECT_LE(st.residual_history[1], st.residual_history[0]);
  EXPECT_LE(st.final_residual, st.residual_history[1]);
  EXPECT_GT(space.size(), b.offline_space().size());
}

TEST(BasisBuilder, EdgeColorsHaveDisjointNeighborhoods) {
  const Fixture s = setup(20, 5);
  const BasisBuilder b(s.p.grid, s.kappa, s.qt, recipe("1+0"));
  size_t total = 0;
  for (const auto& group : b.edge_groups()) {
    std::vector<int> seen;
    for (const int pos : group) {
      const CoarseNeighborhood nb = neighborhood(s.p.grid, b.coarse_edges()[pos]);
      for (const int c : nb.cells) {
        EXPECT_EQ(std::count(seen.begin(), seen.end(), c), 0);
        seen.push_back(c);
      }
    }
    total += group.size();
  }
  EXPECT_EQ(total, b.coarse_edges().size());
}

TEST(SpaceCache, RoundTripsAndRejectsOtherMobility) {
  const Fixture s = setup(10, 5);
  const BasisConfig cfg = recipe("2+0");
  const MultiscaleSpace space = BasisBuilder(s.p.grid, s.kappa, s.qt, cfg).build();
  const std::string dir = (std::filesystem::temp_directory_path() / "mspflow_space_cache_test").string();
  std::filesystem::remove_all(dir);
  save_space(space, dir);
  MultiscaleSpace loaded;
  ASSERT_TRUE(load_space(s.p.grid, dir, s.kappa, cfg, loaded));
  EXPECT_EQ(loaded.size(), space.size());
  EXPECT_LE((Eigen::MatrixXd(loaded.Phi_v) - Eigen::MatrixXd(space.Phi_v)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_FALSE(load_space(s.p.grid, dir, 2.0 * s.kappa, cfg, loaded));
  EXPECT_FALSE(load_space(s.p.grid, dir, s.kappa, recipe("3+0"), loaded));
  std::filesystem::remove_all(dir);
}
