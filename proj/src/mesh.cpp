#include "mspflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mspflow/errors.hpp"

namespace mspflow {

GridHierarchy GridHierarchy::build(int nx, int ny, int block, double lx, double ly) {
  if (nx <= 0 || ny <= 0 || block <= 0) {
    throw ConfigError("grid: nx, ny and block must be positive");
  }
  if (!(lx > 0.0) || !(ly > 0.0)) {
    throw ConfigError("grid: domain lengths must be positive");
  }
  if (nx % block != 0 || ny % block != 0) {
    throw ConfigError("grid: block " + std::to_string(block) + " does not divide " +
                      std::to_string(nx) + "x" + std::to_string(ny));
  }
  const double hx = lx / nx;
  const double hy = ly / ny;
  if (std::abs(hx - hy) > 1e-12 * std::max(hx, hy)) {
    throw ConfigError("grid: fine cells must be square (Lx/nx != Ly/ny)");
  }
  GridHierarchy g;
  g.nx_ = nx;
  g.ny_ = ny;
  g.block_ = block;
  g.lx_ = lx;
  g.ly_ = ly;
  g.h_ = hx;
  return g;
}

EdgeCells GridHierarchy::edge_cells(int e) const {
  EdgeCells ec;
  if (is_vertical(e)) {
    const int i = e % (nx_ + 1);
    const int j = e / (nx_ + 1);
    if (i > 0) ec.minus = cell(i - 1, j);
    if (i < nx_) ec.plus = cell(i, j);
  } else {
    const int k = e - num_vertical_edges();
    const int i = k % nx_;
    const int j = k / nx_;
    if (j > 0) ec.minus = cell(i, j - 1);
    if (j < ny_) ec.plus = cell(i, j);
  }
  return ec;
}

bool GridHierarchy::is_boundary_edge(int e) const {
  const EdgeCells ec = edge_cells(e);
  return ec.minus < 0 || ec.plus < 0;
}

std::array<CellEdge, 4> GridHierarchy::cell_edges(int c) const {
  const int i = cell_i(c);
  const int j = cell_j(c);
  return {CellEdge{vertical_edge(i, j), -1}, CellEdge{vertical_edge(i + 1, j), +1},
          CellEdge{horizontal_edge(i, j), -1}, CellEdge{horizontal_edge(i, j + 1), +1}};
}

std::array<double, 2> GridHierarchy::cell_center(int c) const {
  return {(cell_i(c) + 0.5) * h_, (cell_j(c) + 0.5) * h_};
}

std::array<double, 2> GridHierarchy::edge_midpoint(int e) const {
  if (is_vertical(e)) {
    return {(e % (nx_ + 1)) * h_, (e / (nx_ + 1) + 0.5) * h_};
  }
  const int k = e - num_vertical_edges();
  return {(k % nx_ + 0.5) * h_, (k / nx_) * h_};
}

EdgeCells GridHierarchy::coarse_edge_cells(int ce) const {
  EdgeCells ec;
  const int cx = ncx();
  const int cy = ncy();
  if (is_coarse_vertical(ce)) {
    const int i = ce % (cx + 1);
    const int j = ce / (cx + 1);
    if (i > 0) ec.minus = coarse_cell(i - 1, j);
    if (i < cx) ec.plus = coarse_cell(i, j);
  } else {
    const int k = ce - num_coarse_vertical_edges();
    const int i = k % cx;
    const int j = k / cx;
    if (j > 0) ec.minus = coarse_cell(i, j - 1);
    if (j < cy) ec.plus = coarse_cell(i, j);
  }
  return ec;
}

bool GridHierarchy::is_interior_coarse_edge(int ce) const {
  const EdgeCells ec = coarse_edge_cells(ce);
  return ec.minus >= 0 && ec.plus >= 0;
}

CellRect GridHierarchy::coarse_cell_rect(int k) const {
  const int ci = k % ncx();
  const int cj = k / ncx();
  return {ci * block_, cj * block_, (ci + 1) * block_, (cj + 1) * block_};
}

std::vector<int> GridHierarchy::fine_edges_on_coarse_edge(int ce) const {
  std::vector<int> out;
  out.reserve(block_);
  if (is_coarse_vertical(ce)) {
    const int i = (ce % (ncx() + 1)) * block_;
    const int j0 = (ce / (ncx() + 1)) * block_;
    for (int j = j0; j < j0 + block_; ++j) out.push_back(vertical_edge(i, j));
  } else {
    const int k = ce - num_coarse_vertical_edges();
    const int i0 = (k % ncx()) * block_;
    const int j = (k / ncx()) * block_;
    for (int i = i0; i < i0 + block_; ++i) out.push_back(horizontal_edge(i, j));
  }
  return out;
}

std::vector<int> cells_in(const GridHierarchy& grid, const CellRect& rect) {
  std::vector<int> out;
  out.reserve(static_cast<size_t>(rect.width()) * rect.height());
  for (int j = rect.j0; j < rect.j1; ++j) {
    for (int i = rect.i0; i < rect.i1; ++i) out.push_back(grid.cell(i, j));
  }
  return out;
}

std::vector<int> interior_edges_in(const GridHierarchy& grid, const CellRect& rect) {
  std::vector<int> out;
  for (int j = rect.j0; j < rect.j1; ++j) {
    for (int i = rect.i0 + 1; i < rect.i1; ++i) out.push_back(grid.vertical_edge(i, j));
  }
  for (int j = rect.j0 + 1; j < rect.j1; ++j) {
    for (int i = rect.i0; i < rect.i1; ++i) out.push_back(grid.horizontal_edge(i, j));
  }
  return out;
}

std::vector<CellEdge> boundary_edges_of(const GridHierarchy& grid, const CellRect& rect) {
  std::vector<CellEdge> out;
  for (int j = rect.j0; j < rect.j1; ++j) {
    out.push_back({grid.vertical_edge(rect.i0, j), -1});
    out.push_back({grid.vertical_edge(rect.i1, j), +1});
  }
  for (int i = rect.i0; i < rect.i1; ++i) {
    out.push_back({grid.horizontal_edge(i, rect.j0), -1});
    out.push_back({grid.horizontal_edge(i, rect.j1), +1});
  }
  std::sort(out.begin(), out.end(), [](const CellEdge& a, const CellEdge& b) { return a.edge < b.edge; });
  return out;
}

std::vector<int> interior_coarse_edges(const GridHierarchy& grid) {
  std::vector<int> out;
  out.reserve(static_cast<size_t>(grid.num_coarse_edges()));
  for (int ce = 0; ce < grid.num_coarse_edges(); ++ce) {
    if (grid.is_interior_coarse_edge(ce)) out.push_back(ce);
  }
  return out;
}

CoarseNeighborhood neighborhood(const GridHierarchy& grid, int coarse_edge) {
  if (coarse_edge < 0 || coarse_edge >= grid.num_coarse_edges()) {
    throw DomainError("neighborhood: coarse edge id out of range");
  }
  if (!grid.is_interior_coarse_edge(coarse_edge)) {
    throw DomainError("neighborhood: coarse edge " + std::to_string(coarse_edge) + " lies on the boundary");
  }
  const EdgeCells ec = grid.coarse_edge_cells(coarse_edge);
  CoarseNeighborhood n;
  n.coarse_edge = coarse_edge;
  n.k1 = ec.minus;
  n.k2 = ec.plus;
  n.vertical = grid.is_coarse_vertical(coarse_edge);
  const CellRect r1 = grid.coarse_cell_rect(n.k1);
  const CellRect r2 = grid.coarse_cell_rect(n.k2);
  n.rect = {std::min(r1.i0, r2.i0), std::min(r1.j0, r2.j0), std::max(r1.i1, r2.i1), std::max(r1.j1, r2.j1)};
  n.cells = cells_in(grid, n.rect);
  n.trace_edges = grid.fine_edges_on_coarse_edge(coarse_edge);
  return n;
}

OversampledRegion oversample(const GridHierarchy& grid, const CoarseNeighborhood& nbhd, int layers) {
  if (layers < 0) throw ConfigError("oversample: layers must be nonnegative");
  OversampledRegion r;
  r.base = nbhd;
  r.layers = layers;
  r.rect = {std::max(0, nbhd.rect.i0 - layers), std::max(0, nbhd.rect.j0 - layers),
            std::min(grid.nx(), nbhd.rect.i1 + layers), std::min(grid.ny(), nbhd.rect.j1 + layers)};
  r.cells = cells_in(grid, r.rect);
  r.interior_edges = interior_edges_in(grid, r.rect);
  return r;
}

}  // namespace mspflow
