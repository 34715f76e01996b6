#pragma once

#include <functional>
#include <vector>

#include "vakon/second_order.hpp"
#include "vakon/types.hpp"

namespace vakon {

/// Forced discrete mechanical system with a control entering the actuated
/// slots of the discrete Euler-Lagrange equations, plus a running cost.
/// The optimal control problem "minimize the summed cost subject to the
/// forced equations" reduces to a second-order vakonomic problem whose
/// constraints are the unactuated equation rows.
struct ControlledDiscreteSystem {
  using GradFn = std::function<Vector(const ConfigPoint&, const ConfigPoint&)>;

  DofSplit split;
  Scalar h = 1.0;
  SlottedScalarFn lagrangian;  // arity 2, dim split.n
  std::function<Scalar(const ConfigPoint& q, const ConfigPoint& q_next, const Vector& u)> cost;
  GradFn d1_lagrangian, d2_lagrangian;  // optional analytic slot gradients

  Vector grad_L(int slot, const ConfigPoint& a, const ConfigPoint& b,
                const SolverSettings& settings) const;
};

/// D2 L_d(q_{k-1}, q_k) + D1 L_d(q_k, q_{k+1}): actuated rows equal the
/// control u_k, unactuated rows vanish along admissible motions.
Vector discrete_euler_lagrange(const ControlledDiscreteSystem& sys, const ConfigPoint& q_prev,
                               const ConfigPoint& q, const ConfigPoint& q_next,
                               const SolverSettings& settings = {});

/// Builds the reduced second-order vakonomic problem: the Lagrangian is the
/// running cost evaluated on the control recovered from the actuated
/// equation rows, the constraints are the unactuated rows. Derivatives
/// route through finite differences unless suppliers are attached later.
VakonomicProblem2 reduce(const ControlledDiscreteSystem& sys, const SolverSettings& settings = {});

/// Controls u_1..u_{N-1} along a path q_0..q_N (actuated rows of the
/// discrete Euler-Lagrange one-form). Paths shorter than 3 points are
/// rejected with std::out_of_range.
std::vector<Vector> recover_controls(const ControlledDiscreteSystem& sys, const DiscretePath& path,
                                     const SolverSettings& settings = {});

/// Sum of cost(q_k, q_{k+1}, u_k) over k = 1..N-1 with recovered controls.
Scalar total_cost(const ControlledDiscreteSystem& sys, const DiscretePath& path,
                  const SolverSettings& settings = {});

struct ShootGuess {
  ConfigPoint q2, q3;
  Vector lam0, lam1;
};

struct ShootResult {
  DiscretePath path;
  MultiplierSeq multipliers;
  bool converged = false;
  NewtonStats stats;
};

/// Single-shooting boundary value solve: outer damped Newton on
/// (q2, q3, lam0, lam1) matching the flow2 endpoint pair to (qNm1, qN) and
/// zeroing the two seed constraint triples. The guess must satisfy the seed
/// constraints within 1e-3 (it is projected onto them internally);
/// sensitivities are finite differences of the shooting map, convergence is
/// declared at 100 * newton_tol.
ShootResult shoot_bvp(const VakonomicProblem2& p, const ConfigPoint& q0, const ConfigPoint& q1,
                      const ConfigPoint& qNm1, const ConfigPoint& qN, const ShootGuess& guess,
                      int N, const SolverSettings& settings = {});

}  // namespace vakon
