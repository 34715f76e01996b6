#include "vakon/optimal_control.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "vakon/errors.hpp"
#include "vakon/newton.hpp"

namespace vakon {

namespace {

constexpr Scalar kGuessTolerance = 1e-3;

}  // namespace

Vector ControlledDiscreteSystem::grad_L(int slot, const ConfigPoint& a, const ConfigPoint& b,
                                        const SolverSettings& settings) const {
  const auto& supplier = (slot == 0) ? d1_lagrangian : d2_lagrangian;
  if (supplier) return supplier(a, b);
  const std::array<ConfigPoint, 2> pt{a, b};
  return fd_partial(lagrangian, slot, pt, settings);
}

Vector discrete_euler_lagrange(const ControlledDiscreteSystem& sys, const ConfigPoint& q_prev,
                               const ConfigPoint& q, const ConfigPoint& q_next,
                               const SolverSettings& settings) {
  return sys.grad_L(1, q_prev, q, settings) + sys.grad_L(0, q, q_next, settings);
}

VakonomicProblem2 reduce(const ControlledDiscreteSystem& sys, const SolverSettings& settings) {
  require_valid_split(sys.split);
  if (!sys.lagrangian.eval || !sys.cost)
    throw std::invalid_argument("reduce: system needs a lagrangian and a cost");

  const int n = sys.split.n;
  VakonomicProblem2 p;
  p.n = n;
  p.m = static_cast<int>(sys.split.unactuated.size());
  p.h = sys.h;

  p.lagrangian = SlottedScalarFn{
      3, n, [sys, settings](std::span<const ConfigPoint> q) {
        const Vector el = discrete_euler_lagrange(sys, q[0], q[1], q[2], settings);
        return sys.cost(q[1], q[2], select_rows(el, sys.split.actuated));
      }};
  p.constraints = SlottedVectorFn{
      3, n, p.m, [sys, settings](std::span<const ConfigPoint> q) {
        const Vector el = discrete_euler_lagrange(sys, q[0], q[1], q[2], settings);
        return select_rows(el, sys.split.unactuated);
      }};
  return p;
}

std::vector<Vector> recover_controls(const ControlledDiscreteSystem& sys, const DiscretePath& path,
                                     const SolverSettings& settings) {
  if (path.size() < 3)
    throw std::out_of_range("recover_controls: path has " + std::to_string(path.size()) +
                            " points, need at least 3");
  std::vector<Vector> controls;
  controls.reserve(path.size() - 2);
  for (int k = 1; k + 1 < path.size(); ++k) {
    const Vector el = discrete_euler_lagrange(sys, path[k - 1], path[k], path[k + 1], settings);
    controls.push_back(select_rows(el, sys.split.actuated));
  }
  return controls;
}

Scalar total_cost(const ControlledDiscreteSystem& sys, const DiscretePath& path,
                  const SolverSettings& settings) {
  const std::vector<Vector> controls = recover_controls(sys, path, settings);
  Scalar total = 0.0;
  for (int k = 1; k + 1 < path.size(); ++k) total += sys.cost(path[k], path[k + 1], controls[k - 1]);
  return total;
}

ShootResult shoot_bvp(const VakonomicProblem2& p, const ConfigPoint& q0, const ConfigPoint& q1,
                      const ConfigPoint& qNm1, const ConfigPoint& qN, const ShootGuess& guess,
                      int N, const SolverSettings& settings) {
  for (const auto* q : {&q0, &q1, &qNm1, &qN, &guess.q2, &guess.q3})
    if (q->size() != p.n)
      throw std::invalid_argument("shoot_bvp: configuration dimension mismatch (n = " +
                                  std::to_string(p.n) + ")");
  if (guess.lam0.size() != p.m || guess.lam1.size() != p.m)
    throw std::invalid_argument("shoot_bvp: multiplier length mismatch (m = " +
                                std::to_string(p.m) + ")");
  if (N < 4) throw std::invalid_argument("shoot_bvp: N must be at least 4, got " + std::to_string(N));

  const Scalar guess_violation =
      std::max(p.phi(q0, q1, guess.q2).lpNorm<Eigen::Infinity>(),
               p.phi(q1, guess.q2, guess.q3).lpNorm<Eigen::Infinity>());
  if (guess_violation > kGuessTolerance)
    throw InconsistentSeed("shoot_bvp: guess violates seed constraints by " +
                           std::to_string(guess_violation));

  const ConfigPoint q2_init = project_onto_constraint(p, q0, q1, guess.q2, settings);
  const ConfigPoint q3_init = project_onto_constraint(p, q1, q2_init, guess.q3, settings);

  const int n = p.n, m = p.m;
  const int dim = 2 * n + 2 * m;
  // Seed triples are enforced by the outer residual, so inner flows must
  // accept any seed during the iteration.
  const Scalar inner_seed_tol = std::numeric_limits<Scalar>::infinity();

  auto unpack = [&](const Vector& xi) {
    ShootGuess g;
    g.q2 = xi.head(n);
    g.q3 = xi.segment(n, n);
    g.lam0 = xi.segment(2 * n, m);
    g.lam1 = xi.tail(m);
    return g;
  };

  int evals = 0;
  auto shooting_map = [&](const Vector& xi) -> Vector {
    const ShootGuess g = unpack(xi);
    ++evals;
    Vector S(dim);
    try {
      const Flow2Result flow =
          flow2(p, q0, q1, g.q2, g.q3, g.lam0, g.lam1, N, settings, inner_seed_tol);
      S.head(n) = flow.path[N - 1] - qNm1;
      S.segment(n, n) = flow.path[N] - qN;
    } catch (const SolverError&) {
      if (evals == 1) throw;  // the projected guess itself cannot flow
      S.setConstant(std::numeric_limits<Scalar>::infinity());
      return S;
    }
    S.segment(2 * n, m) = p.phi(q0, q1, g.q2);
    S.tail(m) = p.phi(q1, g.q2, g.q3);
    return S;
  };

  auto jacobian = [&](const Vector& xi) {
    Matrix J(dim, dim);
    Vector probe = xi;
    for (int i = 0; i < dim; ++i) {
      const Scalar x = xi[i];
      const Scalar h = settings.fd_step_second * (1.0 + std::abs(x));
      probe[i] = x + h;
      const Vector sp = shooting_map(probe);
      probe[i] = x - h;
      const Vector sm = shooting_map(probe);
      probe[i] = x;
      J.col(i) = (sp - sm) / (2.0 * h);
    }
    return J;
  };

  Vector xi(dim);
  xi.head(n) = q2_init;
  xi.segment(n, n) = q3_init;
  xi.segment(2 * n, m) = guess.lam0;
  xi.tail(m) = guess.lam1;

  NewtonStats stats;
  const Vector sol = damped_newton(shooting_map, jacobian, xi, settings,
                                   100.0 * settings.newton_tol, "shoot_bvp", &stats,
                                   /*throw_on_maxiter=*/false);

  const ShootGuess g = unpack(sol);
  Flow2Result flow = flow2(p, q0, q1, g.q2, g.q3, g.lam0, g.lam1, N, settings, inner_seed_tol);
  return {std::move(flow.path), std::move(flow.multipliers), stats.converged, stats};
}

}  // namespace vakon
