#include "mspflow/linalg.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#ifdef MSPFLOW_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif
#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "mspflow/errors.hpp"

namespace mspflow {

namespace {

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Triplet = Eigen::Triplet<double>;

std::string residual_message(const char* what, double res, double bound) {
  std::ostringstream os;
  os << what << ": residual " << res << " exceeds " << bound;
  return os.str();
}

}  // namespace

struct SpdSolver::Impl {
  ColMatrix A;
  Eigen::SimplicialLDLT<ColMatrix> ldlt;
};

SpdSolver::SpdSolver(const SparseMatrix& A, double tol) : impl_(std::make_unique<Impl>()), n_(A.rows()), tol_(tol) {
  if (A.rows() != A.cols()) throw SolverError("solve_spd: matrix is not square");
  impl_->A = A;
  impl_->ldlt.compute(impl_->A);
  if (impl_->ldlt.info() != Eigen::Success) throw SolverError("solve_spd: factorization failed");
  const auto d = impl_->ldlt.vectorD();
  if (d.size() > 0 && !(d.minCoeff() > 0.0)) throw SolverError("solve_spd: matrix is not positive definite");
}

SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

Vector SpdSolver::solve(const Vector& b) const {
  if (b.size() != n_) throw SolverError("solve_spd: right-hand side size mismatch");
  Vector x = impl_->ldlt.solve(b);
  const double bound = tol_ * b.norm();
  Vector r = b - impl_->A * x;
  for (int it = 0; it < 3 && r.norm() > bound; ++it) {
    x += impl_->ldlt.solve(r);
    r = b - impl_->A * x;
  }
  if (!(r.norm() <= bound)) throw SolverError(residual_message("solve_spd", r.norm(), bound));
  return x;
}

Vector solve_spd(const SparseMatrix& A, const Vector& b, double tol) { return SpdSolver(A, tol).solve(b); }

#ifdef MSPFLOW_HAVE_UMFPACK
using SaddleLu = Eigen::UmfPackLU<ColMatrix>;
#else
using SaddleLu = Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>>;
#endif

struct SaddleSolver::Impl {
  Eigen::Index m = 0;
  Eigen::Index k = 0;
  Eigen::Index dropped = 0;  // pressure unknowns removed to fix the constant
  Gauge gauge = Gauge::ZeroMean;
  double tol = 1e-12;
  ColMatrix K;
  SaddleLu lu;
  bool analyzed = false;
};

namespace {

ColMatrix bordered_matrix(const SparseMatrix& A, const SparseMatrix& G, const SparseMatrix& B, Eigen::Index d) {
  const Eigen::Index m = A.rows();
  const Eigen::Index k = B.rows();
  if (A.cols() != m || B.cols() != m || G.rows() != m || G.cols() != k) {
    throw SolverError("solve_saddle: block dimensions are inconsistent");
  }
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(A.nonZeros() + G.nonZeros() + B.nonZeros()));
  for (Eigen::Index r = 0; r < m; ++r) {
    for (SparseMatrix::InnerIterator it(A, r); it; ++it) trip.emplace_back(r, it.col(), it.value());
    for (SparseMatrix::InnerIterator it(G, r); it; ++it) {
      if (it.col() >= d) trip.emplace_back(r, m + it.col() - d, -it.value());
    }
  }
  for (Eigen::Index r = d; r < k; ++r) {
    for (SparseMatrix::InnerIterator it(B, r); it; ++it) trip.emplace_back(m + r - d, it.col(), it.value());
  }
  ColMatrix K(m + k - d, m + k - d);
  K.setFromTriplets(trip.begin(), trip.end());
  K.makeCompressed();
  return K;
}

bool same_pattern(const ColMatrix& a, const ColMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.nonZeros() != b.nonZeros()) return false;
  return std::equal(a.outerIndexPtr(), a.outerIndexPtr() + a.cols() + 1, b.outerIndexPtr()) &&
         std::equal(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros(), b.innerIndexPtr());
}

}  // namespace

SaddleSolver::SaddleSolver(const SparseMatrix& A, const SparseMatrix& G, const SparseMatrix& B, Gauge gauge,
                           double tol)
    : impl_(std::make_unique<Impl>()) {
  impl_->gauge = gauge;
  impl_->tol = tol;
  update(A, G, B);
}

void SaddleSolver::update(const SparseMatrix& A, const SparseMatrix& G_in, const SparseMatrix& B) {
  const SparseMatrix G = G_in.size() == 0 ? SparseMatrix(B.transpose()) : G_in;
  Impl& s = *impl_;
  // The constant pressure is removed by pinning p[0] = 0: its column and the
  // first constraint row (implied by the others when sum(g) = 0) are dropped.
  // A bordered zero-mean row would be dense and destroy the fill-reducing
  // ordering; the zero-mean gauge is applied by a shift after the solve instead.
  const Eigen::Index d = (s.gauge == Gauge::None || B.rows() == 0) ? 0 : 1;
  ColMatrix K = bordered_matrix(A, G, B, d);
  const bool reuse = s.analyzed && same_pattern(K, s.K);
  s.m = A.rows();
  s.k = B.rows();
  s.dropped = d;
  s.K = std::move(K);
  if (reuse) {
    s.lu.factorize(s.K);
  } else {
    s.lu.analyzePattern(s.K);
    s.lu.factorize(s.K);
  }
  s.analyzed = true;
  if (s.lu.info() != Eigen::Success) throw SolverError("solve_saddle: factorization failed (singular system)");
}

SaddleSolver::~SaddleSolver() = default;
SaddleSolver::SaddleSolver(SaddleSolver&&) noexcept = default;
SaddleSolver& SaddleSolver::operator=(SaddleSolver&&) noexcept = default;

SaddleSolution SaddleSolver::solve(const Vector& f, const Vector& g) const {
  const Impl& s = *impl_;
  if (f.size() != s.m || g.size() != s.k) throw SolverError("solve_saddle: right-hand side size mismatch");
  if (s.gauge != Gauge::None) {
    const double total = g.sum();
    const double bound = s.tol * (1.0 + g.lpNorm<1>());
    if (std::abs(total) > bound) {
      std::ostringstream os;
      os << "solve_saddle: incompatible constraint data, sum(g) = " << total;
      throw CompatibilityError(os.str());
    }
  }
  const Eigen::Index d = s.dropped;
  const Eigen::Index n = s.K.rows();
  Vector rhs(n);
  rhs.head(s.m) = f;
  rhs.tail(s.k - d) = g.tail(s.k - d);
  Vector x = s.lu.solve(rhs);
  const double bound = s.tol * (1.0 + rhs.norm());
  Vector r = rhs - s.K * x;
  for (int it = 0; it < 3 && r.norm() > bound; ++it) {
    x += s.lu.solve(r);
    r = rhs - s.K * x;
  }
  if (!(r.norm() <= bound) || !x.allFinite()) throw SolverError(residual_message("solve_saddle", r.norm(), bound));
  SaddleSolution sol;
  sol.u = x.head(s.m);
  sol.p = Vector::Zero(s.k);
  sol.p.tail(s.k - d) = x.tail(s.k - d);
  if (s.gauge == Gauge::ZeroMean) sol.p.array() -= sol.p.mean();
  return sol;
}

SaddleSolution solve_saddle(const SaddleSystem& sys, double tol) {
  return SaddleSolver(sys.A, sys.G, sys.B, sys.gauge, tol).solve(sys.f, sys.g);
}

std::vector<EigenPair> eig_sym_gen(const Eigen::MatrixXd& A, const Eigen::MatrixXd& S) {
  if (A.rows() != A.cols() || S.rows() != S.cols() || A.rows() != S.rows()) {
    throw SolverError("eig_sym_gen: pencil dimensions mismatch");
  }
  const Eigen::Index n = A.rows();
  if (n == 0) return {};
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw SolverError("eig_sym_gen: S is not positive definite");
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, S, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success) throw SolverError("eig_sym_gen: eigensolver did not converge");
  const double a_norm = A.norm();
  const double s_norm = S.norm();
  std::vector<EigenPair> out;
  out.reserve(static_cast<size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    EigenPair p{es.eigenvalues()[j], es.eigenvectors().col(j)};
    const double sn = std::sqrt(p.vector.dot(S * p.vector));
    p.vector /= sn;
    // Backward error of the pair; scale-invariant in both A and S.
    const double res = (A * p.vector - p.value * (S * p.vector)).norm();
    const double bound = 1e-10 * (a_norm + std::abs(p.value) * s_norm) * p.vector.norm();
    if (!(res <= bound)) throw SolverError(residual_message("eig_sym_gen", res, bound));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace mspflow
