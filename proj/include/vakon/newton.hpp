#pragma once

#include <functional>
#include <string>

#include "vakon/types.hpp"

namespace vakon {

struct NewtonStats {
  int iterations = 0;
  Scalar residual = 0.0;
  bool converged = false;
};

/// Factor a square matrix and solve A x = b, rejecting numerically singular
/// systems: after partial-pivot LU, the system is singular when
/// min |u_ii| <= singular_tol * max(1, max |u_ii|). Throws SingularKkt with
/// the offending pivot index; `what` names the system in the message.
Vector lu_solve_checked(const Matrix& A, const Vector& b, Scalar singular_tol,
                        const std::string& what);

/// Damped Newton iteration on residual(x) = 0 with full steps halved while
/// the step fails both acceptance tests (at most backtrack_max halvings):
/// a trial is accepted when the residual infinity-norm decreases, or when it
/// passes the affine-invariant natural-level test
///   |J(x)^{-1} r(x_try)| <= (1 - alpha/2) |dx|,
/// which recognizes progress even when badly scaled rows make the plain
/// residual norm rise transiently along the Newton ray. If every halving
/// fails both tests, the undamped step is taken rather than freezing on a
/// microscopic one. Converges when the residual infinity-norm reaches `tol`;
/// throws SingularKkt on singular Jacobians and, unless throw_on_maxiter is
/// cleared, NoConvergence after settings.max_iter iterations (otherwise the
/// best iterate is returned with stats->converged = false).
Vector damped_newton(const std::function<Vector(const Vector&)>& residual,
                     const std::function<Matrix(const Vector&)>& jacobian, Vector x,
                     const SolverSettings& settings, Scalar tol, const std::string& what,
                     NewtonStats* stats = nullptr, bool throw_on_maxiter = true);

}  // namespace vakon
