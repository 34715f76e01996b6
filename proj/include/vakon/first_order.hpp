#pragma once

#include <functional>

#include "vakon/newton.hpp"
#include "vakon/numdiff.hpp"
#include "vakon/types.hpp"

namespace vakon {

/// Discrete constrained variational problem on pairs of configuration
/// points: action sum of L_d(q_k, q_{k+1}) subject to Phi_d(q_k, q_{k+1}) = 0.
/// Analytic derivative suppliers are optional; absent ones fall back to
/// central finite differences of `lagrangian` / `constraints`.
struct VakonomicProblem1 {
  using GradFn = std::function<Vector(const ConfigPoint&, const ConfigPoint&)>;
  using JacFn = std::function<Matrix(const ConfigPoint&, const ConfigPoint&)>;

  int n = 0;
  int m = 0;
  Scalar h = 1.0;  // node spacing used to label output paths

  SlottedScalarFn lagrangian;   // arity 2
  SlottedVectorFn constraints;  // arity 2, m components

  GradFn d1_lagrangian, d2_lagrangian;
  JacFn jac1_constraints, jac2_constraints;  // m x n
  JacFn d12_lagrangian;                      // entry (i,j) = d2 L / dx_i dy_j
  std::function<Matrix(const ConfigPoint&, const ConfigPoint&, const Vector&)>
      d12_constraints;  // lambda-contracted: sum_a lam_a d2 Phi^a / dx_i dy_j

  Vector phi(const ConfigPoint& a, const ConfigPoint& b) const;
  Vector grad_L(int slot, const ConfigPoint& a, const ConfigPoint& b,
                const SolverSettings& settings) const;
  Matrix jac_phi(int slot, const ConfigPoint& a, const ConfigPoint& b,
                 const SolverSettings& settings) const;
  /// Mixed second derivative block d^2 (L + lam . Phi) / dx dy.
  Matrix mixed12(const ConfigPoint& a, const ConfigPoint& b, const Vector& lam,
                 const SolverSettings& settings) const;
};

struct KktMatrix {
  Matrix mat;
  Scalar det = 0.0;
};

struct Step1Result {
  ConfigPoint q_next;
  Vector lam;
  NewtonStats stats;
};

struct Flow1Result {
  DiscretePath path;
  MultiplierSeq multipliers;
};

/// Stacked extremality residual at an interior node: n stationarity rows
/// (variation of the augmented action with respect to q) followed by the m
/// constraint values on the forward pair (q, q_next).
Vector residual1(const VakonomicProblem1& p, const ConfigPoint& q_prev, const ConfigPoint& q,
                 const ConfigPoint& q_next, const Vector& lam_prev, const Vector& lam,
                 const SolverSettings& settings = {});

/// Newton matrix of residual1 with respect to (q_next, lam) together with
/// its determinant:
///   [ d2(L + lam.Phi)/dx dy (x,y)   (D1 Phi(x,y))^T ]
///   [ D2 Phi(x,y)                   0               ]
KktMatrix kkt1(const VakonomicProblem1& p, const ConfigPoint& x, const ConfigPoint& y,
               const Vector& lam, const SolverSettings& settings = {});

/// One forward step: solves residual1 = 0 for (q_next, lam) with seeds
/// q_next = 2q - q_prev and lam = lam_prev.
Step1Result step1(const VakonomicProblem1& p, const ConfigPoint& q_prev, const ConfigPoint& q,
                  const Vector& lam_prev, const SolverSettings& settings = {});

/// Iterates step1 from the seed pair (q0, q1) with multiplier lam0 until the
/// path holds max(N, 1) + 1 points. The seed pair must satisfy the
/// constraints within 10 * newton_tol (InconsistentSeed otherwise); the seed
/// multiplier is the first entry of the returned sequence.
Flow1Result flow1(const VakonomicProblem1& p, const ConfigPoint& q0, const ConfigPoint& q1,
                  const Vector& lam0, int N, const SolverSettings& settings = {});

}  // namespace vakon
