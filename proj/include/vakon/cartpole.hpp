#pragma once

#include <vector>

#include "vakon/optimal_control.hpp"
#include "vakon/second_order.hpp"
#include "vakon/types.hpp"

namespace vakon::cartpole {

/// Cart of mass M on a horizontal rail carrying a pendulum of mass m and
/// length l; the cart slot is actuated, the pendulum angle is not. hbar is
/// the rail height and enters the Lagrangian only as an additive constant.
struct CartPoleParams {
  Scalar M = 1.0;
  Scalar m = 0.3;
  Scalar l = 0.5;
  Scalar g = 9.8;
  Scalar hbar = 0.0;

  CartPoleParams() = default;
  CartPoleParams(Scalar M_, Scalar m_, Scalar l_, Scalar g_, Scalar hbar_ = 0.0);
};

// --- continuous model -----------------------------------------------------

Scalar cp_lagrangian(const CartPoleParams& p, Scalar x, Scalar theta, Scalar xdot,
                     Scalar thetadot);

/// Pendulum acceleration forced by the constraint: (g sin(theta) - xddot cos(theta)) / l.
Scalar cp_G(const CartPoleParams& p, Scalar theta, Scalar xddot);

/// Cart force that produces the accelerations (xddot, thetaddot).
Scalar cp_force_u(const CartPoleParams& p, Scalar theta, Scalar thetadot, Scalar xddot,
                  Scalar thetaddot);

/// cp_force_u with thetaddot eliminated through cp_G; the control along
/// admissible motions.
Scalar cp_bracket(const CartPoleParams& p, Scalar theta, Scalar thetadot, Scalar xddot);

/// Control effort density 0.5 * cp_bracket^2 restricted to admissible motions.
Scalar cp_Ltilde_M(const CartPoleParams& p, Scalar theta, Scalar thetadot, Scalar xddot);

/// Regularity function ((M + m) - m cos^2(theta))^2; strictly positive, with
/// minimum M^2 over theta.
Scalar cp_R(const CartPoleParams& p, Scalar theta);

/// (M + m) - m cos^2(theta), the xddot-coefficient of cp_bracket.
Scalar cp_R1(const CartPoleParams& p, Scalar theta);

// Hand-coded partial derivatives (each one is finite-difference gated in the
// test suite before anything downstream relies on it).
Scalar cp_bracket_dtheta(const CartPoleParams& p, Scalar theta, Scalar thetadot, Scalar xddot);
Scalar cp_bracket_dthetadot(const CartPoleParams& p, Scalar theta, Scalar thetadot);
Scalar cp_Ltilde_M_dtheta(const CartPoleParams& p, Scalar theta, Scalar thetadot, Scalar xddot);
Scalar cp_Ltilde_M_dthetadot(const CartPoleParams& p, Scalar theta, Scalar thetadot, Scalar xddot);
Scalar cp_Ltilde_M_dxddot(const CartPoleParams& p, Scalar theta, Scalar thetadot, Scalar xddot);
Scalar cp_G_dtheta(const CartPoleParams& p, Scalar theta, Scalar xddot);
Scalar cp_G_dxddot(const CartPoleParams& p, Scalar theta);

// --- reduced first-order dynamics ------------------------------------------

/// State of the reduced optimal-control dynamics: configuration, velocity,
/// the pendulum momentum pair (p1_theta, d/dt p1_theta) and the cart
/// momentum pair (pi, d/dt pi). pi is affine in time along solutions.
struct ReducedState {
  Scalar x = 0, theta = 0, xdot = 0, thetadot = 0;
  Scalar p1_theta = 0, p1_theta_dot = 0, pi = 0, pi_dot = 0;

  Eigen::Matrix<Scalar, 8, 1> to_vector() const;
  static ReducedState from_vector(const Eigen::Matrix<Scalar, 8, 1>& v);
};

/// cp_bracket recovered from the momentum variables:
/// (pi - p1_theta cos(theta)/l) / cp_R1.
Scalar cp_recover_bracket(const CartPoleParams& p, const ReducedState& s);

/// Cart acceleration recovered from the momentum variables.
Scalar cp_recover_xddot(const CartPoleParams& p, const ReducedState& s);

/// Time derivative of the reduced state.
ReducedState cp_reduced_rhs(const CartPoleParams& p, const ReducedState& s);

/// Conserved energy of the reduced dynamics.
Scalar cp_H_W1(const CartPoleParams& p, const ReducedState& s);

/// Classic RK4 with fixed step; returns steps + 1 states including s0.
/// Throws IntegrationBlowUp (with the step index) on non-finite states.
std::vector<ReducedState> rk4_integrate(const CartPoleParams& p, const ReducedState& s0,
                                        Scalar dt, int steps);

/// Builds the full reduced state from positions, velocities and the jet of
/// control and constraint-multiplier values (u, du/dt, mu, dmu/dt).
ReducedState cp_state_from_control_data(const CartPoleParams& p, Scalar x, Scalar theta,
                                        Scalar xdot, Scalar thetadot, Scalar u, Scalar udot,
                                        Scalar mu, Scalar mudot);

/// Constraint multiplier mu along a reduced trajectory (the control equals
/// cp_bracket there).
Scalar cp_mu(const CartPoleParams& p, const ReducedState& s);

// --- discrete model ---------------------------------------------------------

/// Midpoint-angle discrete Lagrangian on a node pair; configuration points
/// are (x, theta).
Scalar cp_discrete_lagrangian(const CartPoleParams& p, Scalar h, const ConfigPoint& a,
                              const ConfigPoint& b);
Vector cp_discrete_lagrangian_d1(const CartPoleParams& p, Scalar h, const ConfigPoint& a,
                                 const ConfigPoint& b);
Vector cp_discrete_lagrangian_d2(const CartPoleParams& p, Scalar h, const ConfigPoint& a,
                                 const ConfigPoint& b);

/// Discrete pendulum equation in its h^2-scaled printed form; equals
/// h^2 times the unactuated discrete Euler-Lagrange row.
Scalar cp_discrete_phi(const CartPoleParams& p, Scalar h, const ConfigPoint& qk,
                       const ConfigPoint& qk1, const ConfigPoint& qk2);

struct CartPoleDiscrete {
  ControlledDiscreteSystem system;
  VakonomicProblem2 problem;  // reduce(system) with analytic suppliers attached
};

CartPoleDiscrete cp_discrete_system(const CartPoleParams& p, Scalar h);

/// Four seed nodes and two seed multipliers for the discrete flow, read off a
/// boundary-value solve over the flow's own horizon (N steps of size h) whose
/// endpoint pairs are sampled from the RK4 reference through s0. The seed
/// therefore lies on a discrete extremal of the full window: all stationarity
/// and constraint rows hold to newton_tol. Horizon-matching matters because
/// the stepping recurrence has a growing mode with rate sqrt(g/l); input data
/// consistent only with a shorter window deviates from the long extremal and
/// the deviation compounds until the stepper leaves the solution branch.
struct CartPoleSeed {
  ConfigPoint q0, q1, q2, q3;
  Vector lam0, lam1;
};

CartPoleSeed cp_seed_from_reference(const CartPoleParams& p, Scalar h, const ReducedState& s0,
                                    int N, const SolverSettings& settings = {});

}  // namespace vakon::cartpole
