#pragma once

#include <stdexcept>
#include <string>

namespace mspflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid grid, fluid, or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Query outside the valid domain of an object (e.g. neighborhood of a boundary edge).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input file.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// Operator assembly failed (nonpositive mobility, shape mismatch).
class AssemblyError : public Error {
 public:
  using Error::Error;
};

/// Linear or eigen solve failed or did not reach the requested residual.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Right-hand side violates the solvability condition of a pure-Neumann problem.
class CompatibilityError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Multiscale basis construction failed for a coarse edge.
class BasisError : public Error {
 public:
  using Error::Error;
};

}  // namespace mspflow
