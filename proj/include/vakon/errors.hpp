#pragma once

#include <stdexcept>
#include <string>

namespace vakon {

/// Base class for runtime failures of the iterative solvers. The CLI maps
/// these to exit code 2; configuration/contract errors use the standard
/// logic_error family and map to exit code 1.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// KKT or global Newton matrix is numerically singular.
struct SingularKkt : SolverError {
  SingularKkt(const std::string& what, int pivot_arg)
      : SolverError(what), pivot(pivot_arg) {}
  int pivot;  // offending diagonal position in the LU factor
};

/// Newton iteration exhausted max_iter without meeting the tolerance.
struct NoConvergence : SolverError {
  NoConvergence(const std::string& what, int iterations_arg, double residual_arg)
      : SolverError(what), iterations(iterations_arg), residual(residual_arg) {}
  int iterations;
  double residual;
};

/// Seed data for a flow or shooting solve violates the discrete constraints
/// beyond the admissible tolerance.
struct InconsistentSeed : SolverError {
  using SolverError::SolverError;
};

/// A function evaluation produced a non-finite value.
struct NumericDomainError : SolverError {
  using SolverError::SolverError;
};

/// An integration produced a non-finite state.
struct IntegrationBlowUp : SolverError {
  IntegrationBlowUp(const std::string& what, int step_arg)
      : SolverError(what), step(step_arg) {}
  int step;
};

}  // namespace vakon
