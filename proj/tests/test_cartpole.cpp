#include <doctest.h>

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "vakon/cartpole.hpp"
#include "vakon/numdiff.hpp"
#include "vakon/optimal_control.hpp"
#include "vakon/second_order.hpp"
#include "vakon/types.hpp"

using namespace vakon;
using namespace vakon::cartpole;

namespace {

const Scalar kPi = std::acos(Scalar(-1));

ConfigPoint pt2(Scalar a, Scalar b) {
  ConfigPoint q(2);
  q << a, b;
  return q;
}

CartPoleParams defaults() { return CartPoleParams{}; }

// Small-swing reference state with active control and multiplier data.
ReducedState swing_state(const CartPoleParams& p) {
  return cp_state_from_control_data(p, 0.0, 0.2, 0.0, 0.0, 0.3, 0.0, 0.05, 0.0);
}

Scalar fd1(const std::function<Scalar(Scalar)>& f, Scalar x, Scalar step = 1e-6) {
  return (f(x + step) - f(x - step)) / (2.0 * step);
}

}  // namespace

TEST_CASE("continuous Lagrangian matches direct evaluations") {
  CartPoleParams p = defaults();
  CHECK(cp_lagrangian(p, 0.0, kPi / 2, 0.0, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cp_lagrangian(p, 0.3, 0.0, 0.0, 0.0) == doctest::Approx(-1.47).epsilon(1e-12));
  CHECK(cp_lagrangian(p, -0.2, kPi / 2, 1.0, 0.0) == doctest::Approx(0.65).epsilon(1e-12));
}

TEST_CASE("pendulum acceleration formula") {
  CartPoleParams p = defaults();
  CHECK(cp_G(p, 0.0, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cp_G(p, 0.0, 1.0) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(cp_G(p, kPi / 2, 0.7) == doctest::Approx(19.6).epsilon(1e-12));
  CHECK(cp_G(p, kPi / 2, -3.1) == doctest::Approx(19.6).epsilon(1e-12));
}

TEST_CASE("cart force and its constrained restriction") {
  CartPoleParams p = defaults();
  CHECK(cp_force_u(p, 0.0, 0.0, 0.0, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cp_force_u(p, 0.0, 0.0, 1.0, cp_G(p, 0.0, 1.0)) == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937 gen(911);
  std::uniform_real_distribution<Scalar> angle(-1.0, 1.0), vel(-1.0, 1.0), acc(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    Scalar th = angle(gen), thd = vel(gen), xdd = acc(gen);
    Scalar via_force = cp_force_u(p, th, thd, xdd, cp_G(p, th, xdd));
    Scalar via_bracket = cp_bracket(p, th, thd, xdd);
    CHECK(std::abs(via_force - via_bracket) <= 1e-12 * (1.0 + std::abs(via_bracket)));
  }
}

TEST_CASE("restricted control effort density") {
  CartPoleParams p = defaults();
  CHECK(cp_Ltilde_M(p, kPi / 2, 0.0, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cp_Ltilde_M(p, 0.0, 0.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cp_Ltilde_M(p, 0.0, 0.0, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("regularity scalar and its positivity") {
  CartPoleParams p = defaults();
  CHECK(cp_R(p, kPi / 2) == doctest::Approx(1.69).epsilon(1e-12));
  CHECK(cp_R(p, 0.0) == doctest::Approx(1.0).epsilon(1e-12));

  Scalar min_R = std::numeric_limits<Scalar>::infinity();
  const int grid = 10000;
  for (int i = 0; i < grid; ++i) {
    Scalar th = -kPi + 2.0 * kPi * Scalar(i) / Scalar(grid - 1);
    Scalar formula = ((p.M + p.m) - p.m * std::cos(th) * std::cos(th));
    CHECK(std::abs(cp_R(p, th) - formula * formula) <= 1e-12 * (1.0 + formula * formula));
    min_R = std::min(min_R, cp_R(p, th));
  }
  CHECK(min_R == doctest::Approx(p.M * p.M).epsilon(1e-12));
  CHECK(min_R > 0.0);
}

TEST_CASE("acceleration constraint identity holds identically") {
  CartPoleParams p = defaults();
  std::mt19937 gen(912);
  std::uniform_real_distribution<Scalar> angle(-3.0, 3.0), acc(-5.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    Scalar th = angle(gen), xdd = acc(gen);
    Scalar residual = xdd * std::cos(th) + p.l * cp_G(p, th, xdd) - p.g * std::sin(th);
    CHECK(std::abs(residual) <= 1e-12 * (1.0 + std::abs(xdd) + p.g));
  }
}

TEST_CASE("regularity scalar equals the differenced effort curvature") {
  CartPoleParams p = defaults();
  for (Scalar th : {0.0, 0.4, -0.9, 1.3}) {
    for (Scalar thd : {0.0, 0.6}) {
      // Second derivative of the effort density with respect to the cart
      // acceleration; no momentum correction because the acceleration enters
      // the pendulum equation linearly.
      const Scalar base = 0.3;
      const Scalar step = 1e-4 * (1.0 + std::abs(base));
      auto f = [&](Scalar xdd) { return cp_Ltilde_M(p, th, thd, xdd); };
      Scalar second = (f(base + step) - 2.0 * f(base) + f(base - step)) / (step * step);
      CHECK(std::abs(second - cp_R(p, th)) <= 1e-6 * (1.0 + cp_R(p, th)));
    }
  }
}

TEST_CASE("hand-coded continuous partials pass spot finite-difference gates") {
  CartPoleParams p = defaults();
  for (Scalar th : {0.15, -0.8}) {
    for (Scalar thd : {0.3, -0.5}) {
      for (Scalar xdd : {0.7, -1.1}) {
        CHECK(std::abs(cp_bracket_dtheta(p, th, thd, xdd) -
                       fd1([&](Scalar v) { return cp_bracket(p, v, thd, xdd); }, th)) <= 1e-6);
        CHECK(std::abs(cp_bracket_dthetadot(p, th, thd) -
                       fd1([&](Scalar v) { return cp_bracket(p, th, v, xdd); }, thd)) <= 1e-6);
        CHECK(std::abs(cp_Ltilde_M_dtheta(p, th, thd, xdd) -
                       fd1([&](Scalar v) { return cp_Ltilde_M(p, v, thd, xdd); }, th)) <= 1e-6);
        CHECK(std::abs(cp_Ltilde_M_dthetadot(p, th, thd, xdd) -
                       fd1([&](Scalar v) { return cp_Ltilde_M(p, th, v, xdd); }, thd)) <= 1e-6);
        CHECK(std::abs(cp_Ltilde_M_dxddot(p, th, thd, xdd) -
                       fd1([&](Scalar v) { return cp_Ltilde_M(p, th, thd, v); }, xdd)) <= 1e-6);
        CHECK(std::abs(cp_G_dtheta(p, th, xdd) -
                       fd1([&](Scalar v) { return cp_G(p, v, xdd); }, th)) <= 1e-6);
        CHECK(std::abs(cp_G_dxddot(p, th) -
                       fd1([&](Scalar v) { return cp_G(p, th, v); }, xdd)) <= 1e-6);
      }
    }
  }
}

TEST_CASE("parameter validation rejects non-physical values") {
  CHECK_THROWS_AS(CartPoleParams(0.0, 0.3, 0.5, 9.8), std::invalid_argument);
  CHECK_THROWS_AS(CartPoleParams(1.0, -0.1, 0.5, 9.8), std::invalid_argument);
  CHECK_THROWS_AS(CartPoleParams(1.0, 0.3, 0.0, 9.8), std::invalid_argument);
  CHECK_THROWS_AS(CartPoleParams(1.0, 0.3, 0.5, -9.8), std::invalid_argument);
  CHECK_NOTHROW(CartPoleParams(2.0, 0.4, 0.7, 9.81, 0.1));
}

TEST_CASE("control data round-trips through the reduced state") {
  CartPoleParams p = defaults();
  const Scalar u = 0.37, mu = 0.083;
  ReducedState s = cp_state_from_control_data(p, 0.1, 0.4, -0.2, 0.3, u, 0.11, mu, -0.07);
  CHECK(cp_recover_bracket(p, s) == doctest::Approx(u).epsilon(1e-12));
  CHECK(cp_mu(p, s) == doctest::Approx(mu).epsilon(1e-12));
}

TEST_CASE("the equilibrium is a fixed point of the reduced dynamics") {
  CartPoleParams p = defaults();
  ReducedState s{};  // all-zero state at the straight-down angle
  ReducedState d = cp_reduced_rhs(p, s);
  CHECK(d.to_vector().lpNorm<Eigen::Infinity>() <= 1e-14);

  auto traj = rk4_integrate(p, s, 1e-2, 50);
  REQUIRE(traj.size() == 51);
  CHECK((traj.back().to_vector() - s.to_vector()).lpNorm<Eigen::Infinity>() <= 1e-14);
  CHECK(std::abs(cp_H_W1(p, s)) <= 1e-14);
}

TEST_CASE("the cart momentum variable is affine in time along trajectories") {
  CartPoleParams p = defaults();
  ReducedState s0 = cp_state_from_control_data(p, 0.0, 0.2, 0.1, -0.1, 0.3, 0.1, 0.05, 0.03);
  const Scalar dt = 1e-3;
  const int steps = 2000;
  auto traj = rk4_integrate(p, s0, dt, steps);

  const Scalar pi0 = traj.front().pi;
  const Scalar piT = traj.back().pi;
  const Scalar T = dt * steps;
  Scalar worst = 0.0;
  for (int k = 0; k <= steps; ++k) {
    Scalar t = dt * k;
    Scalar line = pi0 + (piT - pi0) * (t / T);
    worst = std::max(worst, std::abs(traj[k].pi - line));
    CHECK(std::abs(traj[k].pi_dot - s0.pi_dot) <= 1e-12);
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("reduced energy is conserved and converges at fourth order") {
  CartPoleParams p = defaults();
  ReducedState s0 = swing_state(p);

  auto drift = [&](Scalar dt, int steps) {
    auto traj = rk4_integrate(p, s0, dt, steps);
    const Scalar H0 = cp_H_W1(p, traj.front());
    Scalar worst = 0.0;
    for (const auto& s : traj) worst = std::max(worst, std::abs(cp_H_W1(p, s) - H0));
    return worst;
  };

  const Scalar coarse = drift(1e-3, 2000);  // T = 2
  CHECK(coarse <= 1e-6);
  const Scalar fine = drift(5e-4, 4000);
  CHECK(fine < coarse);
  const Scalar ratio = coarse / fine;
  CHECK(ratio >= 8.0);   // fourth-order scheme: halving dt gains ~16x
  CHECK(ratio <= 40.0);
}

TEST_CASE("the rail height shifts the Lagrangian but not the reduced energy") {
  CartPoleParams base = defaults();
  CartPoleParams lifted(base.M, base.m, base.l, base.g, 0.7);
  ReducedState s = swing_state(base);
  Scalar dL = cp_lagrangian(lifted, 0.1, 0.4, 0.2, -0.3) - cp_lagrangian(base, 0.1, 0.4, 0.2, -0.3);
  CHECK(dL == doctest::Approx(-base.m * base.g * 0.7).epsilon(1e-12));
  CHECK(cp_H_W1(lifted, s) == doctest::Approx(cp_H_W1(base, s)).epsilon(1e-14));
}

TEST_CASE("momentum bookkeeping is self-consistent along a trajectory") {
  CartPoleParams p = defaults();
  ReducedState s0 = swing_state(p);
  const Scalar dt = 1e-3;
  auto traj = rk4_integrate(p, s0, dt, 400);
  // Differenced series derivative vs the stored derivative components.
  for (size_t k = 1; k + 1 < traj.size(); k += 37) {
    Scalar fd_p1 = (traj[k + 1].p1_theta - traj[k - 1].p1_theta) / (2.0 * dt);
    CHECK(std::abs(fd_p1 - traj[k].p1_theta_dot) <= 1e-6 * (1.0 + std::abs(fd_p1)));
    Scalar fd_pi = (traj[k + 1].pi - traj[k - 1].pi) / (2.0 * dt);
    CHECK(std::abs(fd_pi - traj[k].pi_dot) <= 1e-6 * (1.0 + std::abs(fd_pi)));
  }
}

TEST_CASE("discrete Lagrangian evaluations") {
  CartPoleParams p = defaults();
  const Scalar h = 0.1;
  ConfigPoint q = pt2(0.3, 0.0);
  CHECK(cp_discrete_lagrangian(p, h, q, q) == doctest::Approx(-1.47).epsilon(1e-12));

  ConfigPoint q2 = pt2(0.3 + h, 0.0);
  CHECK(cp_discrete_lagrangian(p, h, q, q2) == doctest::Approx(-0.82).epsilon(1e-12));
}

TEST_CASE("discrete Lagrangian is consistent with the continuous one") {
  CartPoleParams p = defaults();
  ConfigPoint q = pt2(0.2, 0.5);
  ConfigPoint v = pt2(0.7, -0.4);

  // Evaluated at the midpoint angle the pair value is exact by construction.
  auto gap_mid = [&](Scalar h) {
    return std::abs(cp_discrete_lagrangian(p, h, q, q + h * v) -
                    cp_lagrangian(p, q(0), q(1) + 0.5 * h * v(1), v(0), v(1)));
  };
  CHECK(gap_mid(1e-2) <= 1e-12);

  // Evaluated at the base angle the gap closes linearly in the step.
  auto gap_base = [&](Scalar h) {
    return std::abs(cp_discrete_lagrangian(p, h, q, q + h * v) -
                    cp_lagrangian(p, q(0), q(1), v(0), v(1)));
  };
  const Scalar g2 = gap_base(1e-2), g3 = gap_base(1e-3);
  CHECK(g3 <= 0.2 * g2);  // first-order shrinkage
}

TEST_CASE("discrete pair-Lagrangian gradients pass the derivative checker") {
  CartPoleParams p = defaults();
  const Scalar h = 0.1;
  SlottedScalarFn f{2, 2, [&](std::span<const ConfigPoint> pts) {
                      return cp_discrete_lagrangian(p, h, pts[0], pts[1]);
                    }};
  std::mt19937 gen(913);
  std::uniform_real_distribution<Scalar> pos(-1.0, 1.0), stepd(-0.05, 0.05);
  std::vector<std::vector<ConfigPoint>> samples;
  for (int i = 0; i < 100; ++i) {
    ConfigPoint a = pt2(pos(gen), pos(gen));
    ConfigPoint b = a + pt2(stepd(gen), stepd(gen));
    samples.push_back({a, b});
  }
  SolverSettings settings;
  auto an1 = [&](std::span<const ConfigPoint> pts) {
    return cp_discrete_lagrangian_d1(p, h, pts[0], pts[1]);
  };
  auto an2 = [&](std::span<const ConfigPoint> pts) {
    return cp_discrete_lagrangian_d2(p, h, pts[0], pts[1]);
  };
  CHECK(check_derivatives(an1, f, 0, samples, settings) <= 1e-6);
  CHECK(check_derivatives(an2, f, 1, samples, settings) <= 1e-6);
}

TEST_CASE("discrete pendulum equation evaluations") {
  CartPoleParams p = defaults();
  ConfigPoint down = pt2(0.4, 0.0);
  CHECK(std::abs(cp_discrete_phi(p, 0.1, down, down, down)) <= 1e-15);

  ConfigPoint side = pt2(0.0, kPi / 2);
  CHECK(cp_discrete_phi(p, 0.1, side, side, side) == doctest::Approx(0.0147).epsilon(1e-10));
}

TEST_CASE("printed pendulum equation equals the scaled unactuated row") {
  CartPoleParams p = defaults();
  const Scalar h = 0.1;
  CartPoleDiscrete ds = cp_discrete_system(p, h);
  SolverSettings settings;
  std::mt19937 gen(914);
  std::uniform_real_distribution<Scalar> pos(-1.0, 1.0), stepd(-0.05, 0.05);
  for (int i = 0; i < 100; ++i) {
    ConfigPoint a = pt2(pos(gen), pos(gen));
    ConfigPoint b = a + pt2(stepd(gen), stepd(gen));
    ConfigPoint c = b + pt2(stepd(gen), stepd(gen));
    Vector el = discrete_euler_lagrange(ds.system, a, b, c, settings);
    Scalar printed = cp_discrete_phi(p, h, a, b, c);
    Scalar scaled = h * h * el(1);
    CHECK(std::abs(printed - scaled) <= 1e-10 * (1.0 + std::abs(printed)));

    // The reduced problem's constraint is the printed pendulum equation
    // itself (the step-squared scaling of the unactuated row).
    Vector phi = ds.problem.phi(a, b, c);
    REQUIRE(phi.size() == 1);
    CHECK(std::abs(phi(0) - printed) <= 1e-12 * (1.0 + std::abs(printed)));
  }
}

TEST_CASE("reduced cost Lagrangian on cart-only motion") {
  CartPoleParams p = defaults();
  const Scalar h = 0.05;
  CartPoleDiscrete ds = cp_discrete_system(p, h);
  ConfigPoint x = pt2(0.10, 0.0);
  ConfigPoint y = pt2(0.17, 0.0);
  ConfigPoint z = pt2(0.21, 0.0);
  std::vector<ConfigPoint> triple = {x, y, z};
  // The reduced problem works with the step-squared control h^2 u, so on a
  // cart-only triple its cost is half the square of (M+m) times the second
  // difference of x; the force-scale control is recovered separately.
  Scalar u_scaled = (p.M + p.m) * (2.0 * y(0) - x(0) - z(0));
  CHECK(ds.problem.lagrangian.eval(triple) ==
        doctest::Approx(0.5 * u_scaled * u_scaled).epsilon(1e-12));
  Scalar u_force = u_scaled / (h * h);
  DiscretePath path({x, y, z}, h);
  std::vector<Vector> rec = recover_controls(ds.system, path);
  REQUIRE(rec.size() == 1);
  CHECK(rec[0](0) == doctest::Approx(u_force).epsilon(1e-12));
}

TEST_CASE("coasting carts need no control") {
  CartPoleParams p = defaults();
  const Scalar h = 0.05;
  CartPoleDiscrete ds = cp_discrete_system(p, h);
  std::vector<ConfigPoint> pts;
  for (int k = 0; k < 6; ++k) pts.push_back(pt2(0.02 * k, 0.0));
  DiscretePath path(pts, h);
  for (const Vector& u : recover_controls(ds.system, path)) {
    CHECK(std::abs(u(0)) <= 1e-10);
  }
}

TEST_CASE("reference seed satisfies the discrete constraints and flows") {
  CartPoleParams p = defaults();
  const Scalar h = 0.01;
  ReducedState s0 = swing_state(p);
  const int N = 50;
  CartPoleSeed seed = cp_seed_from_reference(p, h, s0, N);

  CartPoleDiscrete ds = cp_discrete_system(p, h);
  CHECK(ds.problem.phi(seed.q0, seed.q1, seed.q2).lpNorm<Eigen::Infinity>() <= 1e-9);
  CHECK(ds.problem.phi(seed.q1, seed.q2, seed.q3).lpNorm<Eigen::Infinity>() <= 1e-9);
  Flow2Result flow = flow2(ds.problem, seed.q0, seed.q1, seed.q2, seed.q3, seed.lam0, seed.lam1,
                           N);
  REQUIRE(flow.path.size() == N + 1);

  // The discrete trajectory must track the continuous reference closely over
  // half a second.
  auto ref = rk4_integrate(p, s0, h / 100.0, N * 100);
  Scalar worst = 0.0;
  for (int k = 0; k <= N; ++k) {
    const ReducedState& r = ref[static_cast<size_t>(k) * 100];
    worst = std::max(worst, std::abs(flow.path[k](0) - r.x));
    worst = std::max(worst, std::abs(flow.path[k](1) - r.theta));
  }
  CHECK(worst <= 5e-3);
}
