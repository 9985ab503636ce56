#include "mspflow/msbasis.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "mspflow/errors.hpp"
#include "mspflow/parallel.hpp"

namespace mspflow {

namespace {

using Triplet = Eigen::Triplet<double>;

int position_in(const std::vector<int>& sorted, int value) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), value);
  if (it == sorted.end() || *it != value) return -1;
  return static_cast<int>(it - sorted.begin());
}

}  // namespace

LocalMixedSolver::LocalMixedSolver(const GridHierarchy& grid, const CellRect& rect, const Vector& kappa_inv,
                                   double tol)
    : rect_(rect),
      h_(grid.h()),
      cells_(cells_in(grid, rect)),
      interior_(interior_edges_in(grid, rect)),
      boundary_(boundary_edges_of(grid, rect)) {
  if (rect.width() <= 0 || rect.height() <= 0) throw DomainError("local solver: empty rectangle");
  std::unordered_map<int, int> interior_pos;
  std::unordered_map<int, int> boundary_pos;
  for (size_t k = 0; k < interior_.size(); ++k) interior_pos[interior_[k]] = static_cast<int>(k);
  for (size_t k = 0; k < boundary_.size(); ++k) boundary_pos[boundary_[k].edge] = static_cast<int>(k);
  const int m = static_cast<int>(interior_.size());
  const int nb = static_cast<int>(boundary_.size());
  const int nc = static_cast<int>(cells_.size());
  const double h2 = grid.cell_area();

  std::vector<Triplet> aii, aib, g, cb;
  for (int lc = 0; lc < nc; ++lc) {
    const int c = cells_[lc];
    const double w = kappa_inv[c] * h2;
    if (!(w > 0.0) || !std::isfinite(w)) throw AssemblyError("local solver: nonpositive mobility in cell " + std::to_string(c));
    const auto edges = grid.cell_edges(c);
    for (int axis = 0; axis < 2; ++axis) {
      const int pair[2] = {edges[2 * axis].edge, edges[2 * axis + 1].edge};
      for (int x = 0; x < 2; ++x) {
        const auto ix = interior_pos.find(pair[x]);
        if (ix == interior_pos.end()) continue;
        for (int y = 0; y < 2; ++y) {
          const double v = w * (x == y ? 1.0 / 3.0 : 1.0 / 6.0);
          const auto iy = interior_pos.find(pair[y]);
          if (iy != interior_pos.end()) {
            aii.emplace_back(ix->second, iy->second, v);
          } else {
            aib.emplace_back(ix->second, boundary_pos.at(pair[y]), v);
          }
        }
      }
    }
    for (const CellEdge& ce : edges) {
      // Integral of div v_e over this cell.
      const double d = ce.outward * h_;
      const auto ii = interior_pos.find(ce.edge);
      if (ii != interior_pos.end()) {
        g.emplace_back(ii->second, lc, d);
      } else {
        cb.emplace_back(lc, boundary_pos.at(ce.edge), d);
      }
    }
  }
  A_ib_.resize(m, nb);
  A_ib_.setFromTriplets(aib.begin(), aib.end());
  C_b_.resize(nc, nb);
  C_b_.setFromTriplets(cb.begin(), cb.end());
  if (m > 0) {
    SparseMatrix A(m, m);
    A.setFromTriplets(aii.begin(), aii.end());
    SparseMatrix G(m, nc);
    G.setFromTriplets(g.begin(), g.end());
    const SparseMatrix B = G.transpose();
    saddle_ = std::make_unique<SaddleSolver>(A, G, B, Gauge::ZeroMean, tol);
  }
}

LocalSolution LocalMixedSolver::solve(const Vector& boundary_flux, const Vector& divergence) const {
  if (boundary_flux.size() != static_cast<Eigen::Index>(boundary_.size()) ||
      divergence.size() != static_cast<Eigen::Index>(cells_.size())) {
    throw SolverError("local solver: right-hand side size mismatch");
  }
  const Vector g = divergence - C_b_ * boundary_flux;
  LocalSolution out;
  if (!saddle_) {
    if (std::abs(g.sum()) > 1e-12 * (1.0 + g.lpNorm<1>() + divergence.lpNorm<1>())) {
      throw CompatibilityError("local solver: boundary flux does not match the prescribed divergence");
    }
    out.interior = Vector::Zero(0);
    out.pressure = Vector::Zero(static_cast<Eigen::Index>(cells_.size()));
    return out;
  }
  const Vector f = -(A_ib_ * boundary_flux);
  SaddleSolution sol = saddle_->solve(f, g);
  out.interior = std::move(sol.u);
  out.pressure = std::move(sol.p);
  return out;
}

LocalSolverCache::LocalSolverCache(const GridHierarchy& grid, const Vector& kappa) : grid_(grid) {
  if (kappa.size() != grid.num_cells()) throw AssemblyError("local solvers: mobility size mismatch");
  kappa_inv_ = kappa.cwiseInverse();
  solvers_.resize(static_cast<size_t>(grid.num_coarse_cells()));
  parallel_for(grid.num_coarse_cells(), [&](int k) {
    solvers_[k] = std::make_unique<LocalMixedSolver>(grid_, grid_.coarse_cell_rect(k), kappa_inv_);
  });
}

const LocalMixedSolver& LocalSolverCache::coarse_cell(int k) const { return *solvers_.at(static_cast<size_t>(k)); }

std::vector<int> edges_of_neighborhood(const GridHierarchy& grid, const CoarseNeighborhood& nb) {
  std::vector<int> edges = interior_edges_in(grid, nb.rect);
  std::sort(edges.begin(), edges.end());
  return edges;
}

Vector local_edge_field(const LocalSolverCache& solvers, const CoarseNeighborhood& nb, const Vector& trace,
                        Eigen::VectorXd* pressure) {
  const GridHierarchy& grid = solvers.grid();
  if (trace.size() != static_cast<Eigen::Index>(nb.trace_edges.size())) {
    throw BasisError("coarse edge " + std::to_string(nb.coarse_edge) + ": trace length mismatch");
  }
  const std::vector<int> edges = edges_of_neighborhood(grid, nb);
  Vector field = Vector::Zero(static_cast<Eigen::Index>(edges.size()));
  for (size_t t = 0; t < nb.trace_edges.size(); ++t) field[position_in(edges, nb.trace_edges[t])] = trace[t];
  if (pressure) *pressure = Vector::Zero(static_cast<Eigen::Index>(nb.cells.size()));

  for (const int k : {nb.k1, nb.k2}) {
    const LocalMixedSolver& solver = solvers.coarse_cell(k);
    const auto& bnd = solver.boundary_edges();
    Vector bflux = Vector::Zero(static_cast<Eigen::Index>(bnd.size()));
    double outflow = 0.0;
    for (size_t b = 0; b < bnd.size(); ++b) {
      const auto it = std::find(nb.trace_edges.begin(), nb.trace_edges.end(), bnd[b].edge);
      if (it == nb.trace_edges.end()) continue;
      bflux[b] = trace[it - nb.trace_edges.begin()];
      outflow += bnd[b].outward * grid.h() * bflux[b];
    }
    // Constant divergence balancing the flux through E_i.
    const Vector div = Vector::Constant(static_cast<Eigen::Index>(solver.cells().size()),
                                        outflow / static_cast<double>(solver.cells().size()));
    LocalSolution sol;
    try {
      sol = solver.solve(bflux, div);
    } catch (const SolverError& e) {
      throw BasisError("coarse edge " + std::to_string(nb.coarse_edge) + ": " + e.what());
    }
    const auto& inner = solver.interior_edges();
    for (size_t e = 0; e < inner.size(); ++e) field[position_in(edges, inner[e])] = sol.interior[e];
    if (pressure) {
      for (size_t c = 0; c < solver.cells().size(); ++c) {
        const auto it = std::lower_bound(nb.cells.begin(), nb.cells.end(), solver.cells()[c]);
        (*pressure)[it - nb.cells.begin()] = sol.pressure[c];
      }
    }
  }
  return field;
}

EdgeSnapshots build_snapshots(const LocalSolverCache& solvers, int coarse_edge) {
  const GridHierarchy& grid = solvers.grid();
  const CoarseNeighborhood nb = neighborhood(grid, coarse_edge);
  EdgeSnapshots s;
  s.coarse_edge = coarse_edge;
  s.edges = edges_of_neighborhood(grid, nb);
  s.trace = nb.trace_edges;
  const int L = static_cast<int>(nb.trace_edges.size());
  s.psi.resize(static_cast<Eigen::Index>(s.edges.size()), L);
  s.pressure.resize(static_cast<Eigen::Index>(nb.cells.size()), L);
  for (int j = 0; j < L; ++j) {
    Vector delta = Vector::Zero(L);
    delta[j] = 1.0;
    Eigen::VectorXd p;
    s.psi.col(j) = local_edge_field(solvers, nb, delta, &p);
    s.pressure.col(j) = p;
  }
  const double H = grid.coarse_h();
  s.alpha = grid.h() / (H * H);
  return s;
}

SpectralSelection spectral_reduce(const GridHierarchy& grid, const Vector& kappa, const EdgeSnapshots& snaps,
                                  int count) {
  const int L = static_cast<int>(snaps.psi.cols());
  if (count < 1 || count > L) {
    throw BasisError("coarse edge " + std::to_string(snaps.coarse_edge) + ": requested " + std::to_string(count) +
                     " bases from " + std::to_string(L) + " snapshots");
  }
  const double h = grid.h();
  const double H = grid.coarse_h();
  // a_i: flux products on E_i weighted by the mean inverse mobility of the two sides.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(L, L);
  for (const int e : snaps.trace) {
    const EdgeCells ec = grid.edge_cells(e);
    const double kappa_e = 0.5 * (kappa[ec.minus] + kappa[ec.plus]);
    const Eigen::RowVectorXd row = snaps.psi.row(position_in(snaps.edges, e));
    a.noalias() += (h / kappa_e) * row.transpose() * row;
  }
  // s_i: weighted L2 plus divergence products over D_i.
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(L, L);
  const CoarseNeighborhood nb = neighborhood(grid, snaps.coarse_edge);
  const Eigen::RowVectorXd zero = Eigen::RowVectorXd::Zero(L);
  for (const int c : nb.cells) {
    const auto edges = grid.cell_edges(c);
    Eigen::RowVectorXd v[4];
    Eigen::RowVectorXd div = Eigen::RowVectorXd::Zero(L);
    for (int k = 0; k < 4; ++k) {
      const int pos = position_in(snaps.edges, edges[k].edge);
      v[k] = pos < 0 ? zero : Eigen::RowVectorXd(snaps.psi.row(pos));
      div += edges[k].outward * h * v[k];
    }
    const double w = grid.cell_area() / kappa[c];
    for (int axis = 0; axis < 2; ++axis) {
      const Eigen::RowVectorXd& p = v[2 * axis];
      const Eigen::RowVectorXd& q = v[2 * axis + 1];
      s.noalias() += (w / 3.0) * (p.transpose() * p + q.transpose() * q);
      s.noalias() += (w / 6.0) * (p.transpose() * q + q.transpose() * p);
    }
    // div is the cell integral of the divergence; the integrand is div / h^2.
    s.noalias() += div.transpose() * div / grid.cell_area();
  }
  s /= H;
  a = 0.5 * (a + a.transpose());
  s = 0.5 * (s + s.transpose());

  std::vector<EigenPair> pairs;
  try {
    pairs = eig_sym_gen(a, s);
  } catch (const SolverError& e) {
    throw BasisError("coarse edge " + std::to_string(snaps.coarse_edge) + ": " + e.what());
  }
  SpectralSelection out;
  out.count = count;
  out.vectors.resize(L, L);
  for (int j = 0; j < L; ++j) {
    Vector v = pairs[j].vector;
    const double vmax = v.cwiseAbs().maxCoeff();
    for (int k = 0; k < L; ++k) {
      if (std::abs(v[k]) > 1e-8 * vmax) {
        if (v[k] < 0.0) v = -v;
        break;
      }
    }
    out.eigenvalues.push_back(pairs[j].value);
    out.vectors.col(j) = v;
  }
  out.bases = snaps.psi * out.vectors.leftCols(count);
  return out;
}

std::string MultiscaleSpace::label() const {
  return std::to_string(offline_count) + "+" + std::to_string(online_iterations);
}

void MultiscaleSpace::assemble(const GridHierarchy& grid) {
  std::vector<Triplet> trip;
  int col = 0;
  for (const EdgeBasis& b : bases) {
    for (Eigen::Index j = 0; j < b.values.cols(); ++j, ++col) {
      for (size_t r = 0; r < b.edges.size(); ++r) {
        const double v = b.values(static_cast<Eigen::Index>(r), j);
        if (v != 0.0) trip.emplace_back(b.edges[r], col, v);
      }
    }
  }
  Phi_v.resize(grid.num_edges(), col);
  Phi_v.setFromTriplets(trip.begin(), trip.end());
  trip.clear();
  for (int c = 0; c < grid.num_cells(); ++c) trip.emplace_back(c, grid.coarse_of_cell(c), 1.0);
  Phi_p.resize(grid.num_cells(), grid.num_coarse_cells());
  Phi_p.setFromTriplets(trip.begin(), trip.end());
}

std::uint64_t field_hash(const Vector& v) {
  std::uint64_t hash = 1469598103934665603ull;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v[i], sizeof(double));
    for (unsigned char b : bytes) {
      hash ^= b;
      hash *= 1099511628211ull;
    }
  }
  return hash;
}

void BasisConfig::validate(const GridHierarchy& grid) const {
  if (!full_snapshot && (offline < 1 || offline > grid.block())) {
    throw ConfigError("ms: offline basis count must lie in [1, block] (block = " + std::to_string(grid.block()) + ")");
  }
  if (online < 0) throw ConfigError("ms: online iterations must be nonnegative");
  if (oversample_layers < 0) throw ConfigError("ms: oversample_layers must be nonnegative");
  if (tol < 0.0) throw ConfigError("ms: enrichment tolerance must be nonnegative");
}

std::string BasisConfig::label() const {
  return (full_snapshot ? std::string("full") : std::to_string(offline)) + "+" + std::to_string(online);
}

BasisConfig parse_basis_label(const std::string& label) {
  const auto plus = label.find('+');
  if (plus == std::string::npos) throw ConfigError("ms: basis label '" + label + "' is not of the form l+k");
  BasisConfig c;
  const std::string l = label.substr(0, plus);
  const std::string k = label.substr(plus + 1);
  try {
    size_t used = 0;
    if (l == "full") {
      c.full_snapshot = true;
    } else {
      c.offline = std::stoi(l, &used);
      if (used != l.size()) throw std::invalid_argument(l);
    }
    c.online = std::stoi(k, &used);
    if (used != k.size()) throw std::invalid_argument(k);
  } catch (const std::logic_error&) {
    throw ConfigError("ms: basis label '" + label + "' is not of the form l+k");
  }
  return c;
}

CoarseSolve coarse_darcy_solve(const GridHierarchy& grid, const MultiscaleSpace& space, const SparseMatrix& A,
                               const Vector& qt, double tol) {
  const SparseMatrix C = assemble_divergence(grid);
  const SparseMatrix PhiT = space.Phi_v.transpose();
  const SparseMatrix At = PhiT * A * space.Phi_v;
  const SparseMatrix Ct = PhiT * C * space.Phi_p;
  const SparseMatrix Bt = Ct.transpose();
  const Vector g = space.Phi_p.transpose() * (qt * grid.cell_area());
  CoarseSolve out;
  if (space.size() == 0) {
    if (g.cwiseAbs().maxCoeff() > tol * (1.0 + g.lpNorm<1>())) {
      throw CompatibilityError("coarse solve: sources do not balance within a coarse cell");
    }
    out.u_coeffs = Vector::Zero(0);
    out.p_coarse = Vector::Zero(grid.num_coarse_cells());
  } else {
    const SaddleSolution sol = SaddleSolver(At, Ct, Bt, Gauge::ZeroMean, tol).solve(Vector::Zero(space.size()), g);
    out.u_coeffs = sol.u;
    out.p_coarse = sol.p;
  }
  out.u_fine = space.Phi_v * out.u_coeffs;
  out.p_fine = space.Phi_p * out.p_coarse;
  return out;
}

BasisBuilder::BasisBuilder(const GridHierarchy& grid, const Vector& kappa_build, const Vector& qt,
                           const BasisConfig& config)
    : grid_(grid), kappa_(kappa_build), qt_(qt), config_(config) {
  config_.validate(grid_);
  if (kappa_.size() != grid_.num_cells() || qt_.size() != grid_.num_cells()) {
    throw BasisError("basis builder: field size mismatch");
  }
  A_ = assemble_mass(grid_, kappa_.cwiseInverse());
  coarse_edges_ = interior_coarse_edges(grid_);
  for (const int ce : coarse_edges_) neighborhoods_.push_back(neighborhood(grid_, ce));
  solvers_ = std::make_unique<LocalSolverCache>(grid_, kappa_);
  const int ne = static_cast<int>(coarse_edges_.size());
  snapshots_.resize(ne);
  parallel_for(ne, [&](int i) { snapshots_[i] = build_snapshots(*solvers_, coarse_edges_[i]); });
  if (!config_.full_snapshot) {
    spectra_.resize(ne);
    parallel_for(ne, [&](int i) { spectra_[i] = spectral_reduce(grid_, kappa_, snapshots_[i], config_.offline); });
  }
  std::vector<Triplet> trip;
  int col = 0;
  for (const EdgeSnapshots& s : snapshots_) {
    psi_offset_.push_back(col);
    for (Eigen::Index j = 0; j < s.psi.cols(); ++j, ++col) {
      for (size_t r = 0; r < s.edges.size(); ++r) {
        const double v = s.psi(static_cast<Eigen::Index>(r), j);
        if (v != 0.0) trip.emplace_back(s.edges[r], col, v);
      }
    }
  }
  psi_offset_.push_back(col);
  Psi_.resize(grid_.num_edges(), col);
  Psi_.setFromTriplets(trip.begin(), trip.end());
}

MultiscaleSpace BasisBuilder::offline_space() const {
  MultiscaleSpace space;
  space.kappa_build = kappa_;
  space.kappa_hash = field_hash(kappa_);
  space.offline_count = config_.full_snapshot ? grid_.block() : config_.offline;
  for (size_t i = 0; i < snapshots_.size(); ++i) {
    EdgeBasis b;
    b.coarse_edge = coarse_edges_[i];
    b.edges = snapshots_[i].edges;
    b.values = config_.full_snapshot ? snapshots_[i].psi : spectra_[i].bases;
    b.offline = static_cast<int>(b.values.cols());
    space.bases.push_back(std::move(b));
  }
  space.assemble(grid_);
  return space;
}

Vector BasisBuilder::residual_vector(const CoarseSolve& sol) const {
  return A_ * sol.u_fine - assemble_divergence(grid_) * sol.p_fine;
}

Vector BasisBuilder::riesz_solve_region(const Vector& r_fine, const std::vector<int>& snap_edges,
                                        double* norm) const {
  // Columns of the snapshots of the selected coarse edges.
  std::vector<Triplet> trip;
  int col = 0;
  for (const int i : snap_edges) {
    const EdgeSnapshots& s = snapshots_[i];
    for (Eigen::Index j = 0; j < s.psi.cols(); ++j, ++col) {
      for (size_t r = 0; r < s.edges.size(); ++r) trip.emplace_back(s.edges[r], col, s.psi(static_cast<Eigen::Index>(r), j));
    }
  }
  Eigen::SparseMatrix<double> P(grid_.num_edges(), col);
  P.setFromTriplets(trip.begin(), trip.end());
  const Eigen::MatrixXd gram = Eigen::MatrixXd(P.transpose() * (A_ * P));
  const Vector r = P.transpose() * r_fine;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw BasisError("enrichment: snapshot Gram matrix is not positive definite");
  const Vector eta = llt.solve(r);
  if (norm) *norm = std::sqrt(std::max(0.0, r.dot(eta)));
  return P * eta;
}

double BasisBuilder::residual_norm(const CoarseSolve& sol, const CellRect& rect) const {
  std::vector<int> inside;
  for (size_t i = 0; i < neighborhoods_.size(); ++i) {
    if (rect.contains(neighborhoods_[i].rect)) inside.push_back(static_cast<int>(i));
  }
  if (inside.empty()) return 0.0;
  if (inside.size() == neighborhoods_.size()) return global_residual_norm(sol);
  double norm = 0.0;
  riesz_solve_region(residual_vector(sol), inside, &norm);
  return norm;
}

double BasisBuilder::global_residual_norm(const CoarseSolve& sol) const {
  if (Psi_.cols() == 0) return 0.0;
  auto& gram = global_gram_;
  if (!gram) {
    const SparseMatrix PsiT = Psi_.transpose();
    gram = std::make_unique<SpdSolver>(SparseMatrix(PsiT * A_ * Psi_), 1e-10);
  }
  const Vector r = Psi_.transpose() * residual_vector(sol);
  const Vector eta = gram->solve(r);
  return std::sqrt(std::max(0.0, r.dot(eta)));
}

std::vector<std::vector<int>> BasisBuilder::edge_groups() const {
  std::vector<std::vector<int>> groups(4);
  for (size_t i = 0; i < coarse_edges_.size(); ++i) {
    const int ce = coarse_edges_[i];
    const int k1 = grid_.coarse_edge_cells(ce).minus;
    const int ci = k1 % grid_.ncx();
    const int cj = k1 / grid_.ncx();
    const int color = grid_.is_coarse_vertical(ce) ? (ci % 2) : 2 + (cj % 2);
    groups[color].push_back(static_cast<int>(i));
  }
  return groups;
}

void BasisBuilder::enrich_once(MultiscaleSpace& space, EnrichmentState& state) const {
  if (state.groups.empty()) state.groups = edge_groups();
  CoarseSolve sol = coarse_darcy_solve(grid_, space, A_, qt_, config_.solver_tol);
  state.residual_history.push_back(global_residual_norm(sol));
  std::vector<double> region(coarse_edges_.size(), 0.0);
  const double h = grid_.h();
  for (size_t g = 0; g < state.groups.size(); ++g) {
    if (g > 0) sol = coarse_darcy_solve(grid_, space, A_, qt_, config_.solver_tol);
    const Vector r = residual_vector(sol);
    const double energy = std::sqrt(std::max(0.0, sol.u_fine.dot(A_ * sol.u_fine)));
    std::vector<Vector> traces(state.groups[g].size());
    parallel_for(static_cast<int>(state.groups[g].size()), [&](int gi) {
      const int i = state.groups[g][gi];
      const CoarseNeighborhood& nb = neighborhoods_[i];
      const OversampledRegion plus = oversample(grid_, nb, config_.oversample_layers);
      std::vector<int> inside;
      for (size_t j = 0; j < neighborhoods_.size(); ++j) {
        if (plus.rect.contains(neighborhoods_[j].rect)) inside.push_back(static_cast<int>(j));
      }
      double norm = 0.0;
      const Vector eta = riesz_solve_region(r, inside, &norm);
      region[i] = norm;
      Vector t(static_cast<Eigen::Index>(nb.trace_edges.size()));
      for (size_t k = 0; k < nb.trace_edges.size(); ++k) t[k] = eta[nb.trace_edges[k]];
      const double tnorm = std::sqrt(h * t.squaredNorm());
      // A residual at round-off level of the current solution carries no new direction.
      if (!(tnorm > 0.0) || norm <= 1e-10 * energy) return;
      traces[gi] = t / tnorm;
    });
    for (size_t gi = 0; gi < state.groups[g].size(); ++gi) {
      const int i = state.groups[g][gi];
      if (traces[gi].size() == 0) {
        ++state.skipped;
        continue;
      }
      const Vector phi = local_edge_field(*solvers_, neighborhoods_[i], traces[gi]);
      EdgeBasis& b = space.bases[i];
      b.values.conservativeResize(Eigen::NoChange, b.values.cols() + 1);
      b.values.col(b.values.cols() - 1) = phi;
      ++b.online;
    }
    space.assemble(grid_);
  }
  ++space.online_iterations;
  ++state.iterations;
  state.region_residuals.push_back(std::move(region));
  state.final_residual =
      global_residual_norm(coarse_darcy_solve(grid_, space, A_, qt_, config_.solver_tol));
}

EnrichmentState BasisBuilder::enrich_until(MultiscaleSpace& space, double tol, int max_iters) const {
  EnrichmentState state;
  state.groups = edge_groups();
  state.final_residual = global_residual_norm(coarse_darcy_solve(grid_, space, A_, qt_, config_.solver_tol));
  while (state.iterations < max_iters && state.final_residual > tol) enrich_once(space, state);
  return state;
}

MultiscaleSpace BasisBuilder::build(EnrichmentState* state) const {
  MultiscaleSpace space = offline_space();
  if (config_.online > 0) {
    EnrichmentState st = enrich_until(space, config_.tol, config_.online);
    if (state) *state = std::move(st);
  } else if (state) {
    *state = EnrichmentState{};
    state->groups = edge_groups();
    state->final_residual = global_residual_norm(coarse_darcy_solve(grid_, space, A_, qt_, config_.solver_tol));
  }
  return space;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_space(const MultiscaleSpace& space, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IngestionError("basis cache: cannot create " + dir);
  {
    std::ofstream meta(fs::path(dir) / "space.txt");
    meta << "hash " << space.kappa_hash << "\n";
    meta << "offline " << space.offline_count << "\n";
    meta << "online " << space.online_iterations << "\n";
    meta << "edges " << space.bases.size() << "\n";
    if (!meta) throw IngestionError("basis cache: cannot write " + dir);
  }
  for (const EdgeBasis& b : space.bases) {
    std::ofstream out(fs::path(dir) / ("edge_" + std::to_string(b.coarse_edge) + ".txt"));
    out << b.coarse_edge << ' ' << b.values.cols() << ' ' << b.offline << ' ' << b.online << ' ' << b.edges.size()
        << "\n";
    for (size_t r = 0; r < b.edges.size(); ++r) out << b.edges[r] << (r + 1 < b.edges.size() ? ' ' : '\n');
    for (Eigen::Index j = 0; j < b.values.cols(); ++j) {
      for (Eigen::Index r = 0; r < b.values.rows(); ++r) {
        out << format_double(b.values(r, j)) << (r + 1 < b.values.rows() ? ' ' : '\n');
      }
    }
    if (!out) throw IngestionError("basis cache: cannot write edge file in " + dir);
  }
}

bool load_space(const GridHierarchy& grid, const std::string& dir, const Vector& kappa_build,
                const BasisConfig& config, MultiscaleSpace& space) {
  namespace fs = std::filesystem;
  std::ifstream meta(fs::path(dir) / "space.txt");
  if (!meta) return false;
  std::string key;
  std::uint64_t hash = 0;
  int offline = 0, online = 0;
  size_t nedges = 0;
  meta >> key >> hash >> key >> offline >> key >> online >> key >> nedges;
  if (!meta || hash != field_hash(kappa_build)) return false;
  const int want_offline = config.full_snapshot ? grid.block() : config.offline;
  if (offline != want_offline || online != config.online) return false;
  const std::vector<int> edges = interior_coarse_edges(grid);
  if (nedges != edges.size()) return false;
  MultiscaleSpace s;
  s.kappa_build = kappa_build;
  s.kappa_hash = hash;
  s.offline_count = offline;
  s.online_iterations = online;
  for (const int ce : edges) {
    std::ifstream in(fs::path(dir) / ("edge_" + std::to_string(ce) + ".txt"));
    if (!in) return false;
    EdgeBasis b;
    Eigen::Index cols = 0;
    size_t rows = 0;
    in >> b.coarse_edge >> cols >> b.offline >> b.online >> rows;
    if (!in || b.coarse_edge != ce) throw IngestionError("basis cache: malformed file for coarse edge " + std::to_string(ce));
    b.edges.resize(rows);
    for (size_t r = 0; r < rows; ++r) in >> b.edges[r];
    b.values.resize(static_cast<Eigen::Index>(rows), cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (size_t r = 0; r < rows; ++r) in >> b.values(static_cast<Eigen::Index>(r), j);
    }
    if (!in) throw IngestionError("basis cache: truncated file for coarse edge " + std::to_string(ce));
    s.bases.push_back(std::move(b));
  }
  s.assemble(grid);
  space = std::move(s);
  return true;
}

}  // namespace mspflow
