#include "vakon/newton.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "vakon/errors.hpp"

namespace vakon {

namespace {

Eigen::PartialPivLU<Matrix> lu_factor_checked(const Matrix& A, Scalar singular_tol,
                                              const std::string& what) {
  Eigen::PartialPivLU<Matrix> lu(A);
  const Vector diag = lu.matrixLU().diagonal().cwiseAbs();
  Scalar dmin = diag.size() ? diag[0] : 0.0;
  Scalar dmax = dmin;
  int arg_min = 0;
  for (int i = 1; i < diag.size(); ++i) {
    if (diag[i] < dmin) {
      dmin = diag[i];
      arg_min = i;
    }
    dmax = std::max(dmax, diag[i]);
  }
  if (diag.size() && dmin <= singular_tol * std::max(1.0, dmax))
    throw SingularKkt(what + ": singular matrix (pivot " + std::to_string(arg_min) + ", |u_ii| = " +
                          std::to_string(dmin) + ")",
                      arg_min);
  return lu;
}

}  // namespace

Vector lu_solve_checked(const Matrix& A, const Vector& b, Scalar singular_tol,
                        const std::string& what) {
  if (A.rows() != A.cols() || A.rows() != b.size())
    throw std::invalid_argument(what + ": system is " + std::to_string(A.rows()) + "x" +
                                std::to_string(A.cols()) + " with rhs length " +
                                std::to_string(b.size()));
  return lu_factor_checked(A, singular_tol, what).solve(b);
}

Vector damped_newton(const std::function<Vector(const Vector&)>& residual,
                     const std::function<Matrix(const Vector&)>& jacobian, Vector x,
                     const SolverSettings& settings, Scalar tol, const std::string& what,
                     NewtonStats* stats, bool throw_on_maxiter) {
  Vector r = residual(x);
  if (!all_finite(r)) throw NumericDomainError(what + ": non-finite residual at the seed");
  Scalar rnorm = r.lpNorm<Eigen::Infinity>();

  for (int iter = 0; iter < settings.max_iter; ++iter) {
    if (rnorm <= tol) {
      if (stats) *stats = {iter, rnorm, true};
      return x;
    }
    const Matrix J = jacobian(x);
    if (J.rows() != J.cols() || J.rows() != r.size())
      throw std::invalid_argument(what + ": system is " + std::to_string(J.rows()) + "x" +
                                  std::to_string(J.cols()) + " with rhs length " +
                                  std::to_string(r.size()));
    const Eigen::PartialPivLU<Matrix> lu = lu_factor_checked(J, settings.singular_tol, what);
    const Vector dx = lu.solve(-r);
    const Scalar dxnorm = dx.lpNorm<Eigen::Infinity>();

    Scalar alpha = 1.0;
    Vector x_try, r_try;
    Scalar rnorm_try = 0.0;
    Vector x_full, r_full;
    Scalar rnorm_full = std::numeric_limits<Scalar>::infinity();
    bool accepted = false;
    for (int cut = 0;; ++cut) {
      x_try = x + alpha * dx;
      r_try = residual(x_try);
      rnorm_try = all_finite(r_try) ? r_try.lpNorm<Eigen::Infinity>()
                                    : std::numeric_limits<Scalar>::infinity();
      if (cut == 0) {
        x_full = x_try;
        r_full = r_try;
        rnorm_full = rnorm_try;
      }
      if (rnorm_try < rnorm) {
        accepted = true;
        break;
      }
      if (std::isfinite(rnorm_try)) {
        // Affine-invariant acceptance: measure the trial through the current
        // Jacobian. Rows of very different scales can make the plain residual
        // norm rise transiently along the Newton ray even though the iterate
        // is closing in on the solution; the natural level |J^{-1} r| is
        // insensitive to row scaling and recognizes that progress.
        const Scalar natural = lu.solve(-r_try).lpNorm<Eigen::Infinity>();
        if (natural <= (1.0 - 0.5 * alpha) * dxnorm) {
          accepted = true;
          break;
        }
      }
      if (cut >= settings.backtrack_max) break;
      alpha *= 0.5;
    }
    if (!accepted && std::isfinite(rnorm_full)) {
      // Every damped trial failed both tests: accepting the microscopic final
      // trial would freeze the iteration, so take the undamped step instead
      // and let the next iteration contract from there.
      x_try = std::move(x_full);
      r_try = std::move(r_full);
      rnorm_try = rnorm_full;
    }
    if (!all_finite(r_try))
      throw NumericDomainError(what + ": non-finite residual during backtracking");
    x = std::move(x_try);
    r = std::move(r_try);
    rnorm = rnorm_try;
  }
  if (rnorm <= tol) {
    if (stats) *stats = {settings.max_iter, rnorm, true};
    return x;
  }
  if (stats) *stats = {settings.max_iter, rnorm, false};
  if (throw_on_maxiter)
    throw NoConvergence(what + ": no convergence after " + std::to_string(settings.max_iter) +
                            " iterations (residual " + std::to_string(rnorm) + ")",
                        settings.max_iter, rnorm);
  return x;
}

}  // namespace vakon
