#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <memory>
#include <vector>

#include "mspflow/fineops.hpp"

namespace mspflow {

/// Pressure nullspace handling for pure-Neumann saddle problems.
enum class Gauge {
  ZeroMean,  // sum(p) = 0
  PinFirst,  // p[0] = 0
  None,      // system already nonsingular (Dirichlet boundary present)
};

/// Solves A x = b for SPD A. The factorization is reusable across right-hand sides.
class SpdSolver {
 public:
  explicit SpdSolver(const SparseMatrix& A, double tol = 1e-12);
  ~SpdSolver();
  SpdSolver(SpdSolver&&) noexcept;
  SpdSolver& operator=(SpdSolver&&) noexcept;

  Vector solve(const Vector& b) const;
  Eigen::Index size() const { return n_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Eigen::Index n_ = 0;
  double tol_;
};

Vector solve_spd(const SparseMatrix& A, const Vector& b, double tol = 1e-12);

/// [A  -G] [u]   [f]
/// [B   0] [p] = [g]
/// G is the gradient coupling (m x k), B the constraint (k x m). When G is left
/// empty it is taken to be B^T.
struct SaddleSystem {
  SparseMatrix A;
  SparseMatrix G;
  SparseMatrix B;
  Vector f;
  Vector g;
  Gauge gauge = Gauge::ZeroMean;
};

struct SaddleSolution {
  Vector u;
  Vector p;
};

/// Factorizes the gauged saddle matrix once; solve() may then be called for any
/// number of right-hand sides. The constant pressure mode is removed by pinning
/// and the requested gauge applied afterwards, so it holds exactly.
class SaddleSolver {
 public:
  SaddleSolver(const SparseMatrix& A, const SparseMatrix& G, const SparseMatrix& B, Gauge gauge,
               double tol = 1e-12);
  ~SaddleSolver();
  SaddleSolver(SaddleSolver&&) noexcept;
  SaddleSolver& operator=(SaddleSolver&&) noexcept;

  /// Refactors with new blocks; the symbolic analysis is reused when the
  /// sparsity pattern is unchanged.
  void update(const SparseMatrix& A, const SparseMatrix& G, const SparseMatrix& B);

  /// Throws CompatibilityError when the gauge is active and sum(g) != 0.
  SaddleSolution solve(const Vector& f, const Vector& g) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

SaddleSolution solve_saddle(const SaddleSystem& sys, double tol = 1e-12);

struct EigenPair {
  double value = 0.0;
  Vector vector;
};

/// Generalized symmetric eigenproblem A v = lambda S v with S positive definite.
/// Pairs are returned with ascending eigenvalues and v^T S v = 1.
std::vector<EigenPair> eig_sym_gen(const Eigen::MatrixXd& A, const Eigen::MatrixXd& S);

}  // namespace mspflow
