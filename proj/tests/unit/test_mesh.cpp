#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "mspflow/errors.hpp"
#include "mspflow/mesh.hpp"

using namespace mspflow;

TEST(Mesh, UnitSquareHundred) {
  const auto g = GridHierarchy::build(100, 100, 10, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(g.h(), 0.01);
  EXPECT_EQ(g.ncx(), 10);
  EXPECT_EQ(g.ncy(), 10);
  EXPECT_EQ(g.num_cells(), 10000);
  EXPECT_EQ(g.num_edges(), 100 * 101 + 101 * 100);
  EXPECT_EQ(interior_coarse_edges(g).size(), 180u);
}

TEST(Mesh, TwoCellCounts) {
  const auto g = GridHierarchy::build(2, 1, 1, 2.0, 1.0);
  EXPECT_EQ(g.num_edges(), 7);
  EXPECT_EQ(g.num_cells(), 2);
}

TEST(Mesh, RejectsBadConfigurations) {
  EXPECT_THROW(GridHierarchy::build(10, 10, 3, 1.0, 1.0), ConfigError);
  EXPECT_THROW(GridHierarchy::build(10, 20, 5, 1.0, 1.0), ConfigError);
  EXPECT_THROW(GridHierarchy::build(0, 10, 5, 1.0, 1.0), ConfigError);
}

TEST(Mesh, InteriorCoarseEdgeCounts) {
  EXPECT_EQ(interior_coarse_edges(GridHierarchy::build(4, 4, 2, 1, 1)).size(), 4u);
  EXPECT_TRUE(interior_coarse_edges(GridHierarchy::build(4, 4, 4, 1, 1)).empty());
  EXPECT_EQ(interior_coarse_edges(GridHierarchy::build(6, 22, 1, 6, 22)).size(), 236u);
}

TEST(Mesh, InteriorCoarseEdgesVerticalFirst) {
  const auto g = GridHierarchy::build(6, 6, 2, 1, 1);
  const auto edges = interior_coarse_edges(g);
  bool seen_horizontal = false;
  for (int ce : edges) {
    if (!g.is_coarse_vertical(ce)) seen_horizontal = true;
    if (seen_horizontal) {
      EXPECT_FALSE(g.is_coarse_vertical(ce));
    }
  }
  EXPECT_TRUE(std::is_sorted(edges.begin(), edges.end()));
}

TEST(Mesh, CellAreasSumToDomain) {
  const auto g = GridHierarchy::build(30, 20, 5, 1.5, 1.0);
  double total = 0.0;
  for (int c = 0; c < g.num_cells(); ++c) total += g.cell_area();
  EXPECT_NEAR(total, 1.5, 1e-13);
}

TEST(Mesh, InteriorEdgesSharedWithOppositeSigns) {
  const auto g = GridHierarchy::build(7, 5, 1, 7, 5);
  std::map<int, std::vector<int>> signs;
  for (int c = 0; c < g.num_cells(); ++c) {
    for (const CellEdge& ce : g.cell_edges(c)) signs[ce.edge].push_back(ce.outward);
  }
  ASSERT_EQ(static_cast<int>(signs.size()), g.num_edges());
  for (const auto& [e, s] : signs) {
    if (g.is_boundary_edge(e)) {
      EXPECT_EQ(s.size(), 1u);
    } else {
      ASSERT_EQ(s.size(), 2u);
      EXPECT_EQ(s[0] + s[1], 0);
    }
  }
}

TEST(Mesh, EdgeCellsFollowNormal) {
  const auto g = GridHierarchy::build(4, 3, 1, 4, 3);
  const int v = g.vertical_edge(2, 1);
  EXPECT_EQ(g.edge_cells(v).minus, g.cell(1, 1));
  EXPECT_EQ(g.edge_cells(v).plus, g.cell(2, 1));
  const int hz = g.horizontal_edge(2, 1);
  EXPECT_EQ(g.edge_cells(hz).minus, g.cell(2, 0));
  EXPECT_EQ(g.edge_cells(hz).plus, g.cell(2, 1));
  EXPECT_TRUE(g.is_boundary_edge(g.vertical_edge(0, 0)));
  EXPECT_TRUE(g.is_boundary_edge(g.horizontal_edge(3, 3)));
}

TEST(Mesh, NeighborhoodShape) {
  const auto g = GridHierarchy::build(40, 40, 10, 1, 1);
  for (int ce : interior_coarse_edges(g)) {
    const auto n = neighborhood(g, ce);
    EXPECT_EQ(n.trace_edges.size(), 10u);
    if (n.vertical) {
      EXPECT_EQ(n.rect.width(), 20);
      EXPECT_EQ(n.rect.height(), 10);
    } else {
      EXPECT_EQ(n.rect.width(), 10);
      EXPECT_EQ(n.rect.height(), 20);
    }
    std::set<int> cells(n.cells.begin(), n.cells.end());
    std::set<int> expected;
    for (int k : {n.k1, n.k2}) {
      for (int c : cells_in(g, g.coarse_cell_rect(k))) expected.insert(c);
    }
    EXPECT_EQ(cells, expected);
    EXPECT_NE(n.k1, n.k2);
  }
}

TEST(Mesh, NeighborhoodTraceInGeometricOrder) {
  const auto g = GridHierarchy::build(20, 20, 5, 1, 1);
  const auto n = neighborhood(g, interior_coarse_edges(g).front());
  for (size_t k = 1; k < n.trace_edges.size(); ++k) {
    EXPECT_LT(g.edge_midpoint(n.trace_edges[k - 1])[1], g.edge_midpoint(n.trace_edges[k])[1]);
  }
}

TEST(Mesh, AdjacentNeighborhoodsOverlapInOneCoarseCell) {
  const auto g = GridHierarchy::build(30, 10, 10, 3, 1);
  const auto edges = interior_coarse_edges(g);
  ASSERT_EQ(edges.size(), 2u);
  const auto a = neighborhood(g, edges[0]);
  const auto b = neighborhood(g, edges[1]);
  std::vector<int> common;
  std::set_intersection(a.cells.begin(), a.cells.end(), b.cells.begin(), b.cells.end(), std::back_inserter(common));
  EXPECT_EQ(common.size(), 100u);
}

TEST(Mesh, BoundaryCoarseEdgeIsDomainError) {
  const auto g = GridHierarchy::build(20, 20, 10, 1, 1);
  EXPECT_THROW(neighborhood(g, 0), DomainError);
  EXPECT_THROW(neighborhood(g, g.num_coarse_edges()), DomainError);
}

TEST(Mesh, OversampleInteriorAndClipped) {
  const auto g = GridHierarchy::build(60, 60, 10, 1, 1);
  // Vertical coarse edge between coarse cells (2,2) and (3,2): fully interior.
  const int ce = 2 * (g.ncx() + 1) + 3;
  const auto n = neighborhood(g, ce);
  const auto r0 = oversample(g, n, 0);
  EXPECT_EQ(r0.rect, n.rect);
  const auto r3 = oversample(g, n, 3);
  EXPECT_EQ(r3.rect.width(), 26);
  EXPECT_EQ(r3.rect.height(), 16);
  EXPECT_TRUE(r3.rect.contains(n.rect));

  const auto corner = neighborhood(g, interior_coarse_edges(g).front());
  const auto rc = oversample(g, corner, 3);
  EXPECT_GE(rc.rect.i0, 0);
  EXPECT_GE(rc.rect.j0, 0);
  EXPECT_TRUE(rc.rect.contains(corner.rect));
  EXPECT_EQ(rc.rect.j0, 0);
  EXPECT_THROW(oversample(g, n, -1), ConfigError);
}
