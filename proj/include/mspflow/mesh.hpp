#pragma once

#include <array>
#include <vector>

namespace mspflow {

/// Half-open rectangle of fine cells: i in [i0, i1), j in [j0, j1).
struct CellRect {
  int i0 = 0;
  int j0 = 0;
  int i1 = 0;
  int j1 = 0;

  int width() const { return i1 - i0; }
  int height() const { return j1 - j0; }
  bool contains(int i, int j) const { return i >= i0 && i < i1 && j >= j0 && j < j1; }
  bool contains(const CellRect& o) const {
    return o.i0 >= i0 && o.i1 <= i1 && o.j0 >= j0 && o.j1 <= j1;
  }
  bool operator==(const CellRect&) const = default;
};

/// The two cells adjacent to an edge. `minus` lies on the side the edge normal
/// points away from (left / below), `plus` on the side it points into. A missing
/// neighbor (outside the domain) is -1.
struct EdgeCells {
  int minus = -1;
  int plus = -1;
};

/// One edge of a cell and the sign of the cell's outward normal relative to the
/// edge's stored normal.
struct CellEdge {
  int edge = -1;
  int outward = 0;
};

/// Nested fine/coarse structured grid on [0,Lx]x[0,Ly] with square cells.
///
/// Fine cells are numbered row-major (row j = 0 first). Fine edges are numbered
/// with all vertical edges (normal +x) first, row-major over (i in [0,nx], j in
/// [0,ny)), followed by horizontal edges (normal +y), row-major over (i in
/// [0,nx), j in [0,ny]). Coarse cells and coarse edges follow the same scheme.
class GridHierarchy {
 public:
  static GridHierarchy build(int nx, int ny, int block, double lx, double ly);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int block() const { return block_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double h() const { return h_; }
  double coarse_h() const { return h_ * block_; }
  double cell_area() const { return h_ * h_; }

  int num_cells() const { return nx_ * ny_; }
  int num_vertical_edges() const { return (nx_ + 1) * ny_; }
  int num_edges() const { return num_vertical_edges() + nx_ * (ny_ + 1); }

  int cell(int i, int j) const { return j * nx_ + i; }
  int cell_i(int c) const { return c % nx_; }
  int cell_j(int c) const { return c / nx_; }
  int vertical_edge(int i, int j) const { return j * (nx_ + 1) + i; }
  int horizontal_edge(int i, int j) const { return num_vertical_edges() + j * nx_ + i; }
  bool is_vertical(int e) const { return e < num_vertical_edges(); }

  EdgeCells edge_cells(int e) const;
  bool is_boundary_edge(int e) const;
  /// Left, right, bottom, top edges of a fine cell with outward signs.
  std::array<CellEdge, 4> cell_edges(int c) const;
  std::array<double, 2> cell_center(int c) const;
  std::array<double, 2> edge_midpoint(int e) const;

  int ncx() const { return nx_ / block_; }
  int ncy() const { return ny_ / block_; }
  int num_coarse_cells() const { return ncx() * ncy(); }
  int num_coarse_vertical_edges() const { return (ncx() + 1) * ncy(); }
  int num_coarse_edges() const { return num_coarse_vertical_edges() + ncx() * (ncy() + 1); }
  int coarse_cell(int ci, int cj) const { return cj * ncx() + ci; }
  int coarse_of_cell(int c) const { return coarse_cell(cell_i(c) / block_, cell_j(c) / block_); }
  bool is_coarse_vertical(int ce) const { return ce < num_coarse_vertical_edges(); }
  EdgeCells coarse_edge_cells(int ce) const;
  bool is_interior_coarse_edge(int ce) const;
  CellRect coarse_cell_rect(int k) const;
  /// Fine edges composing a coarse edge, ordered by increasing coordinate.
  std::vector<int> fine_edges_on_coarse_edge(int ce) const;

 private:
  int nx_ = 0;
  int ny_ = 0;
  int block_ = 1;
  double lx_ = 0.0;
  double ly_ = 0.0;
  double h_ = 0.0;
};

std::vector<int> cells_in(const GridHierarchy& grid, const CellRect& rect);
/// Edges whose two adjacent cells both lie inside `rect`.
std::vector<int> interior_edges_in(const GridHierarchy& grid, const CellRect& rect);
/// Edges on the boundary of `rect`, with the outward sign relative to the rectangle.
std::vector<CellEdge> boundary_edges_of(const GridHierarchy& grid, const CellRect& rect);

/// Two coarse cells sharing an interior coarse edge E_i.
struct CoarseNeighborhood {
  int coarse_edge = -1;
  int k1 = -1;  // left / lower coarse cell
  int k2 = -1;  // right / upper coarse cell
  bool vertical = true;
  CellRect rect;
  std::vector<int> cells;
  std::vector<int> trace_edges;  // fine edges on E_i in geometric order
};

struct OversampledRegion {
  CoarseNeighborhood base;
  int layers = 0;
  CellRect rect;
  std::vector<int> cells;
  std::vector<int> interior_edges;
};

/// Interior coarse edges: vertical ones first, then horizontal, each row-major.
std::vector<int> interior_coarse_edges(const GridHierarchy& grid);
CoarseNeighborhood neighborhood(const GridHierarchy& grid, int coarse_edge);
/// Dilates the neighborhood by `layers` fine cells on every side, clipped to the domain.
OversampledRegion oversample(const GridHierarchy& grid, const CoarseNeighborhood& nbhd, int layers);

}  // namespace mspflow
