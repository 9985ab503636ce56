#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mspflow/fineops.hpp"
#include "mspflow/linalg.hpp"

namespace mspflow {

struct LocalSolution {
  Vector interior;  // fluxes on interior_edges()
  Vector pressure;  // per cell, zero mean
};

/// Mixed Darcy problem on a rectangle of fine cells: the normal flux is
/// prescribed on every boundary edge of the rectangle and the integral of
/// div u is prescribed per cell. The factorization is built once and reused
/// for every right-hand side.
class LocalMixedSolver {
 public:
  /// `kappa_inv` holds one value per fine cell of the whole grid.
  LocalMixedSolver(const GridHierarchy& grid, const CellRect& rect, const Vector& kappa_inv, double tol = 1e-12);

  const CellRect& rect() const { return rect_; }
  const std::vector<int>& cells() const { return cells_; }
  const std::vector<int>& interior_edges() const { return interior_; }
  const std::vector<CellEdge>& boundary_edges() const { return boundary_; }

  /// `boundary_flux[k]` is the stored-orientation flux on boundary_edges()[k];
  /// `divergence[c]` the integral of div u over cells()[c].
  LocalSolution solve(const Vector& boundary_flux, const Vector& divergence) const;

 private:
  CellRect rect_;
  double h_ = 0.0;
  std::vector<int> cells_;
  std::vector<int> interior_;
  std::vector<CellEdge> boundary_;
  SparseMatrix A_ib_;       // interior x boundary mass coupling
  SparseMatrix C_b_;        // cells x boundary divergence coupling
  std::unique_ptr<SaddleSolver> saddle_;
};

/// Snapshot fields of one interior coarse edge, stored on the fine edges of D_i.
struct EdgeSnapshots {
  int coarse_edge = -1;
  std::vector<int> edges;    // sorted fine edges interior to D_i (includes E_i)
  std::vector<int> trace;    // fine edges on E_i in geometric order
  Eigen::MatrixXd psi;       // edges.size() x L_i, column j has unit flux on trace[j]
  Eigen::MatrixXd pressure;  // D_i cells x L_i, zero mean in each half
  double alpha = 0.0;        // divergence density in K_{i,1}; -alpha in K_{i,2}
};

/// Per-coarse-cell local solvers sharing one mobility field.
class LocalSolverCache {
 public:
  LocalSolverCache(const GridHierarchy& grid, const Vector& kappa);
  const LocalMixedSolver& coarse_cell(int k) const;
  const GridHierarchy& grid() const { return grid_; }

 private:
  GridHierarchy grid_;
  Vector kappa_inv_;
  std::vector<std::unique_ptr<LocalMixedSolver>> solvers_;
};

/// Field on D_i whose normal flux on E_i is `trace` (one value per trace edge),
/// no flow on the rest of the boundary of D_i, and constant divergence
/// +-h sum(trace) / H^2 in the two halves. Values are returned on
/// `edges_of_neighborhood(grid, nb)`.
Vector local_edge_field(const LocalSolverCache& solvers, const CoarseNeighborhood& nb, const Vector& trace,
                        Eigen::VectorXd* pressure = nullptr);

/// Sorted fine edges interior to D_i.
std::vector<int> edges_of_neighborhood(const GridHierarchy& grid, const CoarseNeighborhood& nb);

EdgeSnapshots build_snapshots(const LocalSolverCache& solvers, int coarse_edge);

struct SpectralSelection {
  std::vector<double> eigenvalues;  // all L_i, ascending
  Eigen::MatrixXd vectors;          // L_i x L_i, s-orthonormal columns
  int count = 0;
  Eigen::MatrixXd bases;            // snapshot combinations, edges x count
};

/// Pencil a_i(v, u) = sum over E_i of h kappa_e^{-1} (v.n)(u.n) against
/// s_i(v, u) = (1/H) (int kappa^{-1} v.u + int div v div u) over D_i; keeps the
/// `count` smallest eigenpairs. Eigenvectors are signed so their first
/// significant entry is positive.
SpectralSelection spectral_reduce(const GridHierarchy& grid, const Vector& kappa, const EdgeSnapshots& snaps,
                                  int count);

struct EdgeBasis {
  int coarse_edge = -1;
  std::vector<int> edges;   // sorted support
  Eigen::MatrixXd values;   // edges.size() x count
  int offline = 0;
  int online = 0;
};

struct MultiscaleSpace {
  std::vector<EdgeBasis> bases;  // interior coarse edges in interior_coarse_edges order
  SparseMatrix Phi_v;            // fine edges x N_ms
  SparseMatrix Phi_p;            // fine cells x coarse cells
  Vector kappa_build;
  std::uint64_t kappa_hash = 0;
  int offline_count = 0;
  int online_iterations = 0;

  int size() const { return static_cast<int>(Phi_v.cols()); }
  std::string label() const;
  /// Rebuilds Phi_v and Phi_p from `bases`.
  void assemble(const GridHierarchy& grid);
};

/// FNV-1a hash of the bit patterns of a field; identifies the mobility a space was built with.
std::uint64_t field_hash(const Vector& v);

struct BasisConfig {
  int offline = 3;            // l
  int online = 0;             // k
  double tol = 0.0;           // enrichment stops once ||R_Omega|| <= tol
  int oversample_layers = 3;
  bool full_snapshot = false; // use every snapshot instead of the spectral selection
  double solver_tol = 1e-12;

  void validate(const GridHierarchy& grid) const;
  std::string label() const;
};

/// Parses "l+k".
BasisConfig parse_basis_label(const std::string& label);

struct CoarseSolve {
  Vector u_coeffs;
  Vector p_coarse;
  Vector u_fine;
  Vector p_fine;
};

/// Solves the multiscale problem int kappa^{-1} u.v - int p div v = 0,
/// int div u q = int q_t q with the given mobility on the space.
CoarseSolve coarse_darcy_solve(const GridHierarchy& grid, const MultiscaleSpace& space, const SparseMatrix& A,
                               const Vector& qt, double tol = 1e-12);

struct EnrichmentState {
  int iterations = 0;
  std::vector<double> residual_history;  // ||R_Omega|| before each iteration
  double final_residual = 0.0;           // ||R_Omega|| after the last iteration
  std::vector<std::vector<double>> region_residuals;  // per iteration, per interior coarse edge
  std::vector<std::vector<int>> groups;  // coarse edge positions per color
  int skipped = 0;                       // regions with a vanishing trace
};

/// Offline stage I and II for one mobility field.
class BasisBuilder {
 public:
  BasisBuilder(const GridHierarchy& grid, const Vector& kappa_build, const Vector& qt, const BasisConfig& config);

  const std::vector<EdgeSnapshots>& snapshots() const { return snapshots_; }
  const std::vector<SpectralSelection>& spectra() const { return spectra_; }
  const std::vector<int>& coarse_edges() const { return coarse_edges_; }
  const SparseMatrix& mass() const { return A_; }

  /// Space spanned by the offline selection (or all snapshots).
  MultiscaleSpace offline_space() const;

  /// Riesz norm of the residual of `sol` over the snapshots whose neighborhood
  /// lies inside `rect`; the whole domain when `rect` covers it.
  double residual_norm(const CoarseSolve& sol, const CellRect& rect) const;
  double global_residual_norm(const CoarseSolve& sol) const;

  /// One enrichment sweep over the four edge colors.
  void enrich_once(MultiscaleSpace& space, EnrichmentState& state) const;
  EnrichmentState enrich_until(MultiscaleSpace& space, double tol, int max_iters) const;

  /// Offline selection followed by `config.online` enrichment iterations.
  MultiscaleSpace build(EnrichmentState* state = nullptr) const;

  /// Edge colors whose neighborhoods are pairwise disjoint within a color.
  std::vector<std::vector<int>> edge_groups() const;

 private:
  Vector residual_vector(const CoarseSolve& sol) const;
  Vector riesz_solve_region(const Vector& r_fine, const std::vector<int>& snap_edges, double* norm) const;

  GridHierarchy grid_;
  Vector kappa_;
  Vector qt_;
  BasisConfig config_;
  SparseMatrix A_;  // kappa_build^{-1} mass on all fine edges
  std::vector<int> coarse_edges_;
  std::vector<CoarseNeighborhood> neighborhoods_;
  std::unique_ptr<LocalSolverCache> solvers_;
  std::vector<EdgeSnapshots> snapshots_;
  std::vector<SpectralSelection> spectra_;
  SparseMatrix Psi_;  // all snapshots, fine edges x total
  std::vector<int> psi_offset_;
  mutable std::unique_ptr<SpdSolver> global_gram_;  // built on first use
};

/// Writes one file per coarse edge plus the mobility hash into `dir`.
void save_space(const MultiscaleSpace& space, const std::string& dir);
/// Loads a cached space; returns false when the cache is missing or was built
/// for a different mobility field or basis recipe.
bool load_space(const GridHierarchy& grid, const std::string& dir, const Vector& kappa_build,
                const BasisConfig& config, MultiscaleSpace& space);

}  // namespace mspflow
