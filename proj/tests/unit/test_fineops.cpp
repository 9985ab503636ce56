#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <array>
#include <random>

#include "mspflow/errors.hpp"
#include "mspflow/fineops.hpp"

using namespace mspflow;

namespace {

Eigen::MatrixXd dense(const SparseMatrix& m) { return Eigen::MatrixXd(m); }

// RT0 shape functions on [0,h]^2 for the left, right, bottom, top edges, each
// with unit normal flux in the fixed +x / +y orientation.
std::array<double, 2> rt0(int k, double x, double y, double h) {
  switch (k) {
    case 0: return {(h - x) / h, 0.0};
    case 1: return {x / h, 0.0};
    case 2: return {0.0, (h - y) / h};
    default: return {0.0, y / h};
  }
}

// Three-point Gauss-Legendre, exact for the quadratic integrands here.
double quad_mass(int a, int b, double h) {
  const double pts[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const double wts[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  double s = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double x = 0.5 * h * (pts[i] + 1.0);
      const double y = 0.5 * h * (pts[j] + 1.0);
      const auto u = rt0(a, x, y, h);
      const auto v = rt0(b, x, y, h);
      s += wts[i] * wts[j] * 0.25 * h * h * (u[0] * v[0] + u[1] * v[1]);
    }
  }
  return s;
}

Vector random_vector(int n, unsigned seed, double lo, double hi) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Vector v(n);
  for (int k = 0; k < n; ++k) v[k] = d(rng);
  return v;
}

}  // namespace

TEST(FineOps, SingleCellMassMatchesQuadrature) {
  const double h = 0.37;
  const auto g = GridHierarchy::build(1, 1, 1, h, h);
  const Eigen::MatrixXd A = dense(assemble_mass(g, Vector::Ones(1)));
  const auto edges = g.cell_edges(0);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      EXPECT_NEAR(A(edges[a].edge, edges[b].edge), quad_mass(a, b, h), 1e-15) << a << "," << b;
    }
  }
  EXPECT_NEAR(A(edges[0].edge, edges[0].edge), h * h / 3.0, 1e-16);
  EXPECT_NEAR(A(edges[0].edge, edges[1].edge), h * h / 6.0, 1e-16);
}

TEST(FineOps, LumpedMassIsDiagonal) {
  const auto g = GridHierarchy::build(3, 3, 1, 1, 1);
  const Eigen::MatrixXd A = dense(assemble_mass(g, Vector::Ones(9), MassQuadrature::Lumped));
  EXPECT_EQ((A - Eigen::MatrixXd(A.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0);
}

TEST(FineOps, DivergenceSigns) {
  const auto g = GridHierarchy::build(10, 10, 1, 1, 1);
  const SparseMatrix C = assemble_divergence(g);
  const int e = g.vertical_edge(4, 3);
  const Eigen::MatrixXd Cd = dense(C);
  EXPECT_EQ((Cd.row(e).array() != 0.0).count(), 2);
  EXPECT_NEAR(Cd(e, g.cell(3, 3)), 0.1, 1e-15);
  EXPECT_NEAR(Cd(e, g.cell(4, 3)), -0.1, 1e-15);
}

TEST(FineOps, DivergenceTheoremPerCell) {
  // Constant flux field (a, b) on every edge has zero net outflow per cell.
  const auto g = GridHierarchy::build(6, 5, 1, 6, 5);
  const SparseMatrix C = assemble_divergence(g);
  Vector u(g.num_edges());
  for (int e = 0; e < g.num_edges(); ++e) u[e] = g.is_vertical(e) ? 0.7 : -1.3;
  const Vector div = SparseMatrix(C.transpose()) * u;
  for (int c = 0; c < g.num_cells(); ++c) EXPECT_NEAR(div[c], 0.0, 1e-14);
  // A single unit flux out of one cell shows up as +h there and -h next door.
  Vector one = Vector::Zero(g.num_edges());
  one[g.vertical_edge(3, 2)] = 1.0;
  const Vector d1 = SparseMatrix(C.transpose()) * one;
  EXPECT_DOUBLE_EQ(d1[g.cell(2, 2)], 1.0);
  EXPECT_DOUBLE_EQ(d1[g.cell(3, 2)], -1.0);
}

TEST(FineOps, StaticOperators) {
  const auto g = GridHierarchy::build(10, 10, 1, 1, 1);
  const auto ops = assemble_static(g, zero_sources(g), BoundaryConditions::no_flow());
  EXPECT_EQ(ops.P.size(), 100);
  for (int c = 0; c < 100; ++c) EXPECT_NEAR(ops.P[c], 0.01, 1e-17);
  EXPECT_EQ(ops.F_w.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(ops.F_n.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(ops.D.cwiseAbs().maxCoeff(), 0.0);
  const auto src = assemble_static(g, two_point_source(g, 0.2), BoundaryConditions::no_flow());
  EXPECT_NEAR(src.F_w[0], 0.2 * 0.01, 1e-18);
}

TEST(FineOps, MassIsSpdAndLinearInInverseKappa) {
  const auto g = GridHierarchy::build(5, 4, 1, 5, 4);
  FluidProps p;
  Medium m = homogeneous_medium(g, 1.0);
  m.kappa = random_vector(g.num_cells(), 3, 1.0, 2000.0);
  const Vector sw = random_vector(g.num_cells(), 4, 0.0, 1.0);
  const auto ops = assemble_mobility(g, m, p, sw, CapillaryModel{}, GravityModel{});
  const Eigen::MatrixXd A = dense(ops.A);
  EXPECT_EQ((A - A.transpose()).cwiseAbs().maxCoeff(), 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  for (int t = 0; t < 5; ++t) {
    const Vector x = random_vector(g.num_edges(), 10 + t, -1.0, 1.0);
    EXPECT_GT(x.dot(A * x), 0.0);
  }
  Medium m2 = m;
  m2.kappa *= 2.0;
  const auto ops2 = assemble_mobility(g, m2, p, sw, CapillaryModel{}, GravityModel{});
  EXPECT_LE((dense(ops2.A) * 2.0 - A).cwiseAbs().maxCoeff(), 1e-15 * A.cwiseAbs().maxCoeff());
  EXPECT_EQ(ops.P_c.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(ops.E.cwiseAbs().maxCoeff(), 0.0);
}

TEST(FineOps, NonpositiveMobilityIsAssemblyError) {
  const auto g = GridHierarchy::build(2, 2, 1, 1, 1);
  Vector w = Vector::Ones(4);
  w[2] = 0.0;
  EXPECT_THROW(assemble_mass(g, w), AssemblyError);
}

TEST(FineOps, UpwindFollowsTotalFluxWithoutCapillarity) {
  const auto g = GridHierarchy::build(2, 1, 1, 2, 1);
  FluidProps p;
  const int e = g.vertical_edge(1, 0);
  Vector ut = Vector::Zero(g.num_edges());
  Vector xi = Vector::Zero(g.num_edges());
  Vector sw(2);
  sw << 0.3, 0.8;
  ut[e] = 0.5;
  auto ch = upwind_directions(g, ut, xi, sw, p);
  EXPECT_EQ(ch.w[e], 0);
  EXPECT_EQ(ch.n[e], 0);
  ut[e] = -0.5;
  ch = upwind_directions(g, ut, xi, sw, p);
  EXPECT_EQ(ch.w[e], 1);
  EXPECT_EQ(ch.n[e], 1);
  ut[e] = 0.0;
  ch = upwind_directions(g, ut, xi, sw, p);
  EXPECT_EQ(ch.w[e], 0);
  EXPECT_EQ(ch.n[e], 0);
  // Boundary edges use their own cell.
  EXPECT_EQ(ch.w[g.vertical_edge(0, 0)], 0);
  EXPECT_EQ(ch.n[g.vertical_edge(2, 0)], 1);
}

TEST(FineOps, CounterCurrentMatchesBruteForceSigns) {
  const auto g = GridHierarchy::build(2, 1, 1, 2, 1);
  FluidProps p;
  const int e = g.vertical_edge(1, 0);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  int opposite = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    Vector sw(2);
    sw << 0.5 * (d(rng) + 1.0), 0.5 * (d(rng) + 1.0);
    Vector ut = Vector::Zero(g.num_edges());
    Vector xi = Vector::Zero(g.num_edges());
    ut[e] = d(rng);
    xi[e] = 3.0 * d(rng);
    const auto ch = upwind_directions(g, ut, xi, sw, p);
    // Oracle: evaluate each fractional flow directly from the mobility formulas.
    auto lam = [&](double s) {
      const double se = std::clamp((s - p.s_rw) / (1.0 - p.s_rw - p.s_rn), 0.0, 1.0);
      return std::array<double, 2>{se * se / p.mu_w, (1.0 - se) * (1.0 - se) / p.mu_n};
    };
    const auto l0 = lam(sw[0]);
    const auto l1 = lam(sw[1]);
    const double fw0 = l0[0] / (l0[0] + l0[1]);
    const double fw1 = l1[0] / (l1[0] + l1[1]);
    const double fw = 0.5 * (fw0 + fw1);
    const double fn = 0.5 * ((1 - fw0) + (1 - fw1));
    const double fwfn = 0.5 * (fw0 * (1 - fw0) + fw1 * (1 - fw1));
    const double uw = fw * ut[e] - fwfn * xi[e];
    const double un = fn * ut[e] + fwfn * xi[e];
    if (std::abs(uw) < 1e-12 || std::abs(un) < 1e-12) continue;
    EXPECT_EQ(ch.w[e], uw > 0 ? 0 : 1);
    EXPECT_EQ(ch.n[e], un > 0 ? 0 : 1);
    opposite += ch.w[e] != ch.n[e];
  }
  EXPECT_GT(opposite, 0);
}

TEST(FineOps, TotalUpwindEqualsDivergenceTranspose) {
  const auto g = GridHierarchy::build(4, 4, 2, 1, 1);
  FluidProps p;
  const SparseMatrix Ct = assemble_divergence(g).transpose();
  for (unsigned seed = 0; seed < 5; ++seed) {
    const Vector sw = random_vector(g.num_cells(), seed, 0.0, 1.0);
    const Vector ut = random_vector(g.num_edges(), seed + 100, -1.0, 1.0);
    const Vector xi = Vector::Zero(g.num_edges());
    const auto ch = upwind_directions(g, ut, xi, sw, p);
    const auto ops = assemble_upwind(g, sw, ch, p);
    EXPECT_EQ((dense(ops.B_t) - dense(Ct)).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE((dense(ops.B_w) + dense(ops.B_n) - dense(ops.B_t)).cwiseAbs().maxCoeff(), 1e-17);
    for (int c = 0; c < g.num_cells(); ++c) {
      EXPECT_LE(ops.B_w.row(c).nonZeros(), 4);
    }
    EXPECT_LE(dense(ops.B_w).cwiseAbs().maxCoeff(), g.h());
  }
}

TEST(FineOps, FullySaturatedUpwind) {
  const auto g = GridHierarchy::build(3, 3, 1, 1, 1);
  FluidProps p;
  const Vector sw = Vector::Ones(g.num_cells());
  const Vector ut = random_vector(g.num_edges(), 5, -1.0, 1.0);
  const auto ch = upwind_directions(g, ut, Vector::Zero(g.num_edges()), sw, p);
  const auto ops = assemble_upwind(g, sw, ch, p);
  const Eigen::MatrixXd Ct = dense(assemble_divergence(g)).transpose();
  EXPECT_EQ((dense(ops.B_w) - Ct).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(dense(ops.B_n).cwiseAbs().maxCoeff(), 0.0);
}

TEST(FineOps, TwoCellUpwindEntries) {
  const auto g = GridHierarchy::build(2, 1, 1, 2, 1);
  FluidProps p;
  p.s_rw = 0.0;
  p.s_rn = 0.0;
  Vector sw(2);
  sw << 0.5, 0.1;
  Vector ut = Vector::Zero(g.num_edges());
  const int e = g.vertical_edge(1, 0);
  ut[e] = 1.0;
  const auto ch = upwind_directions(g, ut, Vector::Zero(g.num_edges()), sw, p);
  const auto ops = assemble_upwind(g, sw, ch, p);
  const Eigen::MatrixXd Bw = dense(ops.B_w);
  EXPECT_NEAR(Bw(0, e), 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(Bw(1, e), -5.0 / 6.0, 1e-15);
}

TEST(FineOps, RefillKeepsPattern) {
  const auto g = GridHierarchy::build(4, 3, 1, 4, 3);
  FluidProps p;
  UpwindAssembler asmb(g);
  UpwindOperators ops;
  for (unsigned seed = 0; seed < 3; ++seed) {
    const Vector sw = random_vector(g.num_cells(), seed, 0.0, 1.0);
    const Vector ut = random_vector(g.num_edges(), seed + 7, -1.0, 1.0);
    const auto ch = upwind_directions(g, ut, Vector::Zero(g.num_edges()), sw, p);
    asmb.assemble(sw, ch, p, ops);
    const auto fresh = assemble_upwind(g, sw, ch, p);
    EXPECT_EQ((dense(ops.B_w) - dense(fresh.B_w)).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(FineOps, GravityVectorIsDepthGradient) {
  const auto g = GridHierarchy::build(3, 4, 1, 3, 4);
  GravityModel grav;
  grav.enabled = true;
  const Vector E = assemble_gravity(g, assemble_divergence(g), grav);
  // z = Ly - y: dz/dy = -1, so interior horizontal edges carry g * (-1) * h^2.
  EXPECT_NEAR(E[g.horizontal_edge(1, 2)], -9.81, 1e-12);
  EXPECT_NEAR(E[g.vertical_edge(1, 2)], 0.0, 1e-12);
}

TEST(FineOps, DofLayoutNoFlow) {
  const auto g = GridHierarchy::build(4, 3, 1, 4, 3);
  const auto bc = BoundaryConditions::no_flow();
  const auto d = DofLayout::build(g, bc);
  int interior = 0;
  for (int e = 0; e < g.num_edges(); ++e) interior += !g.is_boundary_edge(e);
  EXPECT_EQ(d.num_velocity_dofs(), interior);
  const Vector v = random_vector(g.num_edges(), 1, -1, 1);
  const Vector back = d.extend_vector(d.restrict_vector(v), d.prescribed_fluxes(g, bc));
  for (int e = 0; e < g.num_edges(); ++e) EXPECT_EQ(back[e], g.is_boundary_edge(e) ? 0.0 : v[e]);
}
