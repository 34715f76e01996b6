#pragma once

#include <array>
#include <functional>

#include "vakon/newton.hpp"
#include "vakon/numdiff.hpp"
#include "vakon/types.hpp"

namespace vakon {

/// Discrete constrained variational problem on triples of configuration
/// points: action sum of L_d(q_k, q_{k+1}, q_{k+2}) subject to
/// Phi_d(q_k, q_{k+1}, q_{k+2}) = 0. Analytic derivative suppliers are
/// optional with finite-difference fallbacks, matching VakonomicProblem1.
struct VakonomicProblem2 {
  using GradFn = std::function<Vector(const ConfigPoint&, const ConfigPoint&, const ConfigPoint&)>;
  using JacFn = std::function<Matrix(const ConfigPoint&, const ConfigPoint&, const ConfigPoint&)>;

  int n = 0;
  int m = 0;
  Scalar h = 1.0;  // node spacing used to label output paths

  SlottedScalarFn lagrangian;   // arity 3
  SlottedVectorFn constraints;  // arity 3, m components

  GradFn d1_lagrangian, d2_lagrangian, d3_lagrangian;
  JacFn jac1_constraints, jac2_constraints, jac3_constraints;  // m x n
  JacFn d13_lagrangian;  // entry (i,j) = d2 L / dx_i dz_j
  std::function<Matrix(const ConfigPoint&, const ConfigPoint&, const ConfigPoint&, const Vector&)>
      d13_constraints;  // lambda-contracted mixed block of the constraints

  Vector phi(const ConfigPoint& x, const ConfigPoint& y, const ConfigPoint& z) const;
  Vector grad_L(int slot, const ConfigPoint& x, const ConfigPoint& y, const ConfigPoint& z,
                const SolverSettings& settings) const;
  Matrix jac_phi(int slot, const ConfigPoint& x, const ConfigPoint& y, const ConfigPoint& z,
                 const SolverSettings& settings) const;
  /// d^2 (L + lam . Phi) / d(slot_i) d(slot_j); uses the analytic (1,3)
  /// suppliers when applicable, otherwise differences the best available
  /// first-derivative representation.
  Matrix mixed_second(int slot_i, int slot_j, const ConfigPoint& x, const ConfigPoint& y,
                      const ConfigPoint& z, const Vector& lam, const SolverSettings& settings) const;
};

/// Four most recent points q_{k-2}, q_{k-1}, q_k, q_{k+1} and the two most
/// recent multipliers, as consumed by step2.
struct FlowWindow {
  std::array<ConfigPoint, 4> q;
  Vector lam_prev2;  // lambda^{k-2}
  Vector lam_prev1;  // lambda^{k-1}
};

struct Step2Result {
  ConfigPoint q_next;  // q_{k+2}
  Vector lam;          // lambda^k
  NewtonStats stats;
};

struct Flow2Result {
  DiscretePath path;
  MultiplierSeq multipliers;
};

struct Kkt2Result {
  Matrix mat;
  Scalar det = 0.0;
};

/// Stacked extremality residual at node k: n stationarity rows summing the
/// three slot gradients of L and the three lambda-weighted constraint
/// Jacobians over the windows ending, centered and starting at q_k, then the
/// m constraint values on the forward triple (q_k, q_{k+1}, q_{k+2}).
Vector residual2(const VakonomicProblem2& p, const ConfigPoint& q_km2, const ConfigPoint& q_km1,
                 const ConfigPoint& q_k, const ConfigPoint& q_kp1, const ConfigPoint& q_kp2,
                 const Vector& lam_km2, const Vector& lam_km1, const Vector& lam_k,
                 const SolverSettings& settings = {});

/// Newton matrix of residual2 with respect to (q_{k+2}, lambda^k), evaluated
/// on the forward triple (x, y, z) = (q_k, q_{k+1}, q_{k+2}):
///   [ d2(L + lam.Phi)/dx dz (x,y,z)   (D1 Phi(x,y,z))^T ]
///   [ D3 Phi(x,y,z)                    0                ]
/// Returned with its determinant as the regularity diagnostic.
Kkt2Result kkt2(const VakonomicProblem2& p, const ConfigPoint& x, const ConfigPoint& y,
                const ConfigPoint& z, const Vector& lam, const SolverSettings& settings = {});

/// One forward step: solves residual2 = 0 for (q_{k+2}, lambda^k) with seeds
/// q_{k+2} = 2 q_{k+1} - q_k and lambda^k = lambda^{k-1}. Both window triples
/// must satisfy the constraints within 10 * newton_tol.
Step2Result step2(const VakonomicProblem2& p, const FlowWindow& window,
                  const SolverSettings& settings = {});

/// Iterates step2 from four seed points and two seed multipliers up to a
/// path of N + 1 points (N >= 4), returning multipliers lambda^0..lambda^{N-2}
/// (the two seeds followed by one per step). Seed triples must satisfy the
/// constraints within seed_tol (default 10 * newton_tol).
Flow2Result flow2(const VakonomicProblem2& p, const ConfigPoint& q0, const ConfigPoint& q1,
                  const ConfigPoint& q2, const ConfigPoint& q3, const Vector& lam0,
                  const Vector& lam1, int N, const SolverSettings& settings = {},
                  Scalar seed_tol = -1.0);

/// Minimum-norm Newton projection of z onto { Phi(x, y, z) = 0 }.
ConfigPoint project_onto_constraint(const VakonomicProblem2& p, const ConfigPoint& x,
                                    const ConfigPoint& y, ConfigPoint z,
                                    const SolverSettings& settings = {});

}  // namespace vakon
