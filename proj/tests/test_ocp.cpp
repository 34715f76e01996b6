#include <doctest.h>

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "vakon/errors.hpp"
#include "vakon/optimal_control.hpp"
#include "vakon/second_order.hpp"
#include "vakon/types.hpp"

using namespace vakon;

namespace {

ConfigPoint pt2(Scalar a, Scalar b) {
  ConfigPoint q(2);
  q << a, b;
  return q;
}

// Forced planar free particle: pair kinetic energy, first coordinate
// actuated, quadratic control effort. The reduced formulation has
// L~(x,y,z) = 0.5 * ((2y - x - z)_0)^2 and constraint (2y - x - z)_1 = 0.
ControlledDiscreteSystem quad_system(bool analytic) {
  ControlledDiscreteSystem sys;
  sys.split = DofSplit{2, {0}, {1}};
  sys.h = 1.0;
  sys.lagrangian = {2, 2, [](std::span<const ConfigPoint> pts) {
                      return 0.5 * (pts[1] - pts[0]).squaredNorm();
                    }};
  sys.cost = [](const ConfigPoint&, const ConfigPoint&, const Vector& u) {
    return 0.5 * u.squaredNorm();
  };
  if (analytic) {
    sys.d1_lagrangian = [](const ConfigPoint& a, const ConfigPoint& b) { return Vector(a - b); };
    sys.d2_lagrangian = [](const ConfigPoint& a, const ConfigPoint& b) { return Vector(b - a); };
  }
  return sys;
}

Scalar hand_u(const ConfigPoint& x, const ConfigPoint& y, const ConfigPoint& z) {
  return 2.0 * y(0) - x(0) - z(0);
}

Scalar hand_phi(const ConfigPoint& x, const ConfigPoint& y, const ConfigPoint& z) {
  return 2.0 * y(1) - x(1) - z(1);
}

// Hand-derived suppliers for the reduced quadratic problem, used where a
// claim at round-off precision requires an exact-arithmetic derivative route.
void attach_reduced_suppliers(VakonomicProblem2& p) {
  p.d1_lagrangian = [](const ConfigPoint& x, const ConfigPoint& y, const ConfigPoint& z) {
    Vector g = Vector::Zero(2);
    g(0) = -hand_u(x, y, z);
    return g;
  };
  p.d2_lagrangian = [](const ConfigPoint& x, const ConfigPoint& y, const ConfigPoint& z) {
    Vector g = Vector::Zero(2);
    g(0) = 2.0 * hand_u(x, y, z);
    return g;
  };
  p.d3_lagrangian = [](const ConfigPoint& x, const ConfigPoint& y, const ConfigPoint& z) {
    Vector g = Vector::Zero(2);
    g(0) = -hand_u(x, y, z);
    return g;
  };
  p.jac1_constraints = [](const ConfigPoint&, const ConfigPoint&, const ConfigPoint&) {
    Matrix j(1, 2);
    j << 0.0, -1.0;
    return j;
  };
  p.jac2_constraints = [](const ConfigPoint&, const ConfigPoint&, const ConfigPoint&) {
    Matrix j(1, 2);
    j << 0.0, 2.0;
    return j;
  };
  p.jac3_constraints = [](const ConfigPoint&, const ConfigPoint&, const ConfigPoint&) {
    Matrix j(1, 2);
    j << 0.0, -1.0;
    return j;
  };
  p.d13_lagrangian = [](const ConfigPoint&, const ConfigPoint&, const ConfigPoint&) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 1.0;
    return m;
  };
  p.d13_constraints = [](const ConfigPoint&, const ConfigPoint&, const ConfigPoint&,
                         const Vector&) { return Matrix(Matrix::Zero(2, 2)); };
}

// Unconstrained second-difference toy shared with the stencil tests; its
// boundary problems have exact cubic solutions.
VakonomicProblem2 stencil_problem() {
  VakonomicProblem2 p;
  p.n = 2;
  p.m = 0;
  p.lagrangian = {3, 2, [](std::span<const ConfigPoint> pts) {
                    return 0.5 * (pts[2] - 2.0 * pts[1] + pts[0]).squaredNorm();
                  }};
  p.constraints = {3, 2, 0, [](std::span<const ConfigPoint>) { return Vector(0); }};
  auto second = [](const ConfigPoint& x, const ConfigPoint& y, const ConfigPoint& z) {
    return Vector(z - 2.0 * y + x);
  };
  p.d1_lagrangian = second;
  p.d3_lagrangian = second;
  p.d2_lagrangian = [second](const ConfigPoint& x, const ConfigPoint& y, const ConfigPoint& z) {
    return Vector(-2.0 * second(x, y, z));
  };
  p.d13_lagrangian = [](const ConfigPoint&, const ConfigPoint&, const ConfigPoint&) {
    return Matrix(Matrix::Identity(2, 2));
  };
  return p;
}

ConfigPoint cubic_node(int k) {
  Scalar t = Scalar(k);
  ConfigPoint q(2);
  q << 0.1 + 0.03 * t + 0.02 * t * t - 0.004 * t * t * t,
      -0.2 + 0.05 * t - 0.01 * t * t + 0.002 * t * t * t;
  return q;
}

}  // namespace

TEST_CASE("reduce produces the hand-derived cost Lagrangian and constraint") {
  ControlledDiscreteSystem sys = quad_system(true);
  VakonomicProblem2 p = reduce(sys);
  CHECK(p.n == 2);
  CHECK(p.m == 1);

  ConfigPoint x = pt2(0.12, -0.3);
  ConfigPoint y = pt2(0.4, 0.05);
  ConfigPoint z = pt2(0.55, 0.6);
  std::vector<ConfigPoint> triple = {x, y, z};
  CHECK(p.lagrangian.eval(triple) ==
        doctest::Approx(0.5 * hand_u(x, y, z) * hand_u(x, y, z)).epsilon(1e-12));
  Vector phi = p.phi(x, y, z);
  REQUIRE(phi.size() == 1);
  CHECK(phi(0) == doctest::Approx(hand_phi(x, y, z)).epsilon(1e-12));
}

TEST_CASE("reduce through the finite-difference fallback matches the hand formulas") {
  ControlledDiscreteSystem sys = quad_system(false);
  VakonomicProblem2 p = reduce(sys);
  ConfigPoint x = pt2(0.02, -0.03);
  ConfigPoint y = pt2(0.04, 0.05);
  ConfigPoint z = pt2(0.05, 0.06);
  std::vector<ConfigPoint> triple = {x, y, z};
  CHECK(std::abs(p.lagrangian.eval(triple) - 0.5 * hand_u(x, y, z) * hand_u(x, y, z)) <= 1e-9);
  CHECK(std::abs(p.phi(x, y, z)(0) - hand_phi(x, y, z)) <= 1e-7);
}

TEST_CASE("a zero running cost reduces to a zero Lagrangian") {
  ControlledDiscreteSystem sys = quad_system(true);
  sys.cost = [](const ConfigPoint&, const ConfigPoint&, const Vector&) { return 0.0; };
  VakonomicProblem2 p = reduce(sys);
  std::vector<ConfigPoint> triple = {pt2(0.3, 0.1), pt2(-0.2, 0.4), pt2(0.6, -0.5)};
  CHECK(p.lagrangian.eval(triple) == 0.0);
}

TEST_CASE("discrete_euler_lagrange splits into control and constraint rows") {
  ControlledDiscreteSystem sys = quad_system(true);
  ConfigPoint x = pt2(0.1, 0.2);
  ConfigPoint y = pt2(0.3, 0.25);
  ConfigPoint z = pt2(0.4, 0.3);
  SolverSettings settings;
  Vector el = discrete_euler_lagrange(sys, x, y, z, settings);
  REQUIRE(el.size() == 2);
  CHECK(el(0) == doctest::Approx(hand_u(x, y, z)).epsilon(1e-12));
  CHECK(el(1) == doctest::Approx(hand_phi(x, y, z)).epsilon(1e-12));
}

TEST_CASE("reduced residual2 equals the hand-assembled optimality system") {
  ControlledDiscreteSystem sys = quad_system(true);
  VakonomicProblem2 p = reduce(sys);
  attach_reduced_suppliers(p);

  std::vector<ConfigPoint> q = {pt2(0.05, -0.1), pt2(0.15, 0.0), pt2(0.3, 0.1), pt2(0.4, 0.2),
                                pt2(0.45, 0.3)};
  Vector lam_a = Vector::Constant(1, 0.3);
  Vector lam_b = Vector::Constant(1, -0.2);
  Vector lam_c = Vector::Constant(1, 0.15);

  Vector r = residual2(p, q[0], q[1], q[2], q[3], q[4], lam_a, lam_b, lam_c);
  REQUIRE(r.size() == 3);

  // Hand assembly: sum of the three slot gradients of the cost composed with
  // the recovered control, plus the multiplier-weighted constraint rows, then
  // the forward-triple constraint value.
  Vector hand = Vector::Zero(3);
  hand(0) += -hand_u(q[2], q[3], q[4]);                       // d/dq_k of the k-th window
  hand(0) += 2.0 * hand_u(q[1], q[2], q[3]);                  // middle slot of the (k-1) window
  hand(0) += -hand_u(q[0], q[1], q[2]);                       // last slot of the (k-2) window
  hand(1) += lam_c(0) * (-1.0) + lam_b(0) * 2.0 + lam_a(0) * (-1.0);
  hand(2) = hand_phi(q[2], q[3], q[4]);
  CHECK((r - hand).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("finite-difference reduced gradients match the hand derivatives") {
  ControlledDiscreteSystem sys = quad_system(true);
  VakonomicProblem2 fd_route = reduce(sys);
  VakonomicProblem2 an_route = reduce(sys);
  attach_reduced_suppliers(an_route);

  // The cost Lagrangian is itself assembled from differenced quantities, so
  // first-order differencing of it needs a step well above its noise floor;
  // both composed functions are polynomial, so the larger step costs no
  // truncation error.
  SolverSettings settings;
  settings.fd_step_first = 1e-4;

  ConfigPoint x = pt2(0.02, -0.01);
  ConfigPoint y = pt2(0.05, 0.01);
  ConfigPoint z = pt2(0.07, 0.025);
  for (int slot = 0; slot < 3; ++slot) {
    Vector g_fd = fd_route.grad_L(slot, x, y, z, settings);
    Vector g_an = an_route.grad_L(slot, x, y, z, settings);
    CHECK((g_fd - g_an).lpNorm<Eigen::Infinity>() <= 1e-6);
    Matrix j_fd = fd_route.jac_phi(slot, x, y, z, settings);
    Matrix j_an = an_route.jac_phi(slot, x, y, z, settings);
    CHECK((j_fd - j_an).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("recover_controls vanishes on straight-line coasting") {
  ControlledDiscreteSystem sys = quad_system(true);
  std::vector<ConfigPoint> pts;
  for (int k = 0; k < 6; ++k) pts.push_back(pt2(0.1 * k, -0.2 + 0.05 * k));
  DiscretePath path(pts, 1.0);
  std::vector<Vector> u = recover_controls(sys, path);
  REQUIRE(u.size() == 4);  // k = 1 .. N-1
  for (const Vector& uk : u) {
    REQUIRE(uk.size() == 1);
    CHECK(std::abs(uk(0)) <= 1e-12);
  }
}

TEST_CASE("recover_controls matches the actuated difference rows") {
  ControlledDiscreteSystem sys = quad_system(true);
  std::vector<ConfigPoint> pts = {pt2(0.0, 0.0), pt2(0.1, 0.05), pt2(0.15, 0.1),
                                  pt2(0.3, 0.15)};
  DiscretePath path(pts, 1.0);
  std::vector<Vector> u = recover_controls(sys, path);
  REQUIRE(u.size() == 2);
  CHECK(u[0](0) == doctest::Approx(hand_u(pts[0], pts[1], pts[2])).epsilon(1e-12));
  CHECK(u[1](0) == doctest::Approx(hand_u(pts[1], pts[2], pts[3])).epsilon(1e-12));
}

TEST_CASE("recover_controls rejects paths shorter than three points") {
  ControlledDiscreteSystem sys = quad_system(true);
  DiscretePath path({pt2(0, 0), pt2(1, 1)}, 1.0);
  CHECK_THROWS_AS(recover_controls(sys, path), std::out_of_range);
  CHECK_THROWS_AS(total_cost(sys, path), std::out_of_range);
}

TEST_CASE("total_cost sums the running cost over interior controls") {
  ControlledDiscreteSystem sys = quad_system(true);
  std::vector<ConfigPoint> pts = {pt2(0.0, 0.0), pt2(0.1, 0.05), pt2(0.15, 0.1),
                                  pt2(0.3, 0.15), pt2(0.32, 0.2)};
  DiscretePath path(pts, 1.0);
  std::vector<Vector> u = recover_controls(sys, path);
  Scalar expected = 0.0;
  for (const Vector& uk : u) expected += 0.5 * uk.squaredNorm();
  CHECK(total_cost(sys, path) == doctest::Approx(expected).epsilon(1e-12));

  // Straight-line coasting costs nothing.
  std::vector<ConfigPoint> line;
  for (int k = 0; k < 5; ++k) line.push_back(pt2(0.2 * k, 0.1 * k));
  CHECK(std::abs(total_cost(sys, DiscretePath(line, 1.0))) <= 1e-12);

  // Zero-cost systems report zero.
  ControlledDiscreteSystem free_sys = quad_system(true);
  free_sys.cost = [](const ConfigPoint&, const ConfigPoint&, const Vector&) { return 0.0; };
  CHECK(total_cost(free_sys, path) == 0.0);
}

TEST_CASE("total_cost shifts by (N-1) times a constant cost offset") {
  ControlledDiscreteSystem sys = quad_system(true);
  ControlledDiscreteSystem shifted = quad_system(true);
  const Scalar offset = 3.7;
  shifted.cost = [offset](const ConfigPoint&, const ConfigPoint&, const Vector& u) {
    return 0.5 * u.squaredNorm() + offset;
  };
  std::vector<ConfigPoint> pts = {pt2(0.0, 0.0), pt2(0.1, 0.05), pt2(0.15, 0.1),
                                  pt2(0.3, 0.15), pt2(0.32, 0.2)};
  DiscretePath path(pts, 1.0);
  const int controls = path.size() - 2;  // k = 1 .. N-1
  CHECK(total_cost(shifted, path) ==
        doctest::Approx(total_cost(sys, path) + controls * offset).epsilon(1e-12));
}

TEST_CASE("flow2 on the reduced problem satisfies the forced equations") {
  ControlledDiscreteSystem sys = quad_system(true);
  VakonomicProblem2 p = reduce(sys);
  attach_reduced_suppliers(p);

  // Seed: the unactuated coordinate affine (constraint-consistent), the
  // actuated coordinate slightly curved.
  auto seed_node = [](int k) {
    return pt2(0.02 * k + 0.005 * k * k, -0.1 + 0.04 * k);
  };
  const int N = 8;
  Flow2Result flow = flow2(p, seed_node(0), seed_node(1), seed_node(2), seed_node(3),
                           Vector::Zero(1), Vector::Zero(1), N);
  REQUIRE(flow.path.size() == N + 1);

  SolverSettings settings;
  DiscretePath path(flow.path.points(), 1.0);
  std::vector<Vector> u = recover_controls(sys, path);
  for (int k = 1; k + 1 <= N; ++k) {
    Vector el = discrete_euler_lagrange(sys, flow.path[k - 1], flow.path[k], flow.path[k + 1],
                                        settings);
    CHECK(std::abs(el(1)) <= 1e-9);  // unactuated row enforced by the flow
    CHECK(el(0) == doctest::Approx(u[k - 1](0)).epsilon(1e-12));
  }
  Scalar direct = 0.0;
  for (const Vector& uk : u) direct += 0.5 * uk.squaredNorm();
  CHECK(total_cost(sys, path) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("shoot_bvp recovers a cubic from its boundary data") {
  VakonomicProblem2 p = stencil_problem();
  const int N = 8;
  ShootGuess guess;
  guess.q2 = cubic_node(2) + pt2(0.03, -0.02);
  guess.q3 = cubic_node(3) + pt2(-0.01, 0.04);
  guess.lam0 = Vector(0);
  guess.lam1 = Vector(0);
  ShootResult result = shoot_bvp(p, cubic_node(0), cubic_node(1), cubic_node(N - 1),
                                 cubic_node(N), guess, N);
  CHECK(result.converged);
  REQUIRE(result.path.size() == N + 1);
  for (int k = 0; k <= N; ++k) {
    CHECK((result.path[k] - cubic_node(k)).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("shoot_bvp returns a consistent degenerate problem unchanged") {
  VakonomicProblem2 p = stencil_problem();
  const int N = 4;
  ShootGuess guess{cubic_node(2), cubic_node(3), Vector(0), Vector(0)};
  ShootResult result = shoot_bvp(p, cubic_node(0), cubic_node(1), cubic_node(3), cubic_node(4),
                                 guess, N);
  CHECK(result.converged);
  REQUIRE(result.path.size() == 5);
  for (int k = 0; k <= N; ++k) {
    CHECK((result.path[k] - cubic_node(k)).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}
