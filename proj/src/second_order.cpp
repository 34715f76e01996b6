#include "vakon/second_order.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "vakon/errors.hpp"

namespace vakon {

namespace {

void check_config(const VakonomicProblem2& p, const ConfigPoint& q, const char* what) {
  if (q.size() != p.n)
    throw std::invalid_argument(std::string(what) + ": configuration dimension " +
                                std::to_string(q.size()) + ", expected n = " + std::to_string(p.n));
}

void check_lam(const VakonomicProblem2& p, const Vector& lam, const char* what) {
  if (lam.size() != p.m)
    throw std::invalid_argument(std::string(what) + ": multiplier length " +
                                std::to_string(lam.size()) + ", expected m = " +
                                std::to_string(p.m));
}

// Central difference of an analytic three-slot gradient with respect to one
// slot; the inner gradient is exact so ~sqrt(eps) steps apply.
Matrix fd_of_grad3(const VakonomicProblem2::GradFn& grad, std::array<ConfigPoint, 3> pt,
                   int wrt_slot, const SolverSettings& settings) {
  const int n = static_cast<int>(pt[0].size());
  Matrix out(n, n);
  for (int j = 0; j < n; ++j) {
    const Scalar x = pt[wrt_slot][j];
    const Scalar h = settings.fd_step_first * (1.0 + std::abs(x));
    pt[wrt_slot][j] = x + h;
    const Vector gp = grad(pt[0], pt[1], pt[2]);
    pt[wrt_slot][j] = x - h;
    const Vector gm = grad(pt[0], pt[1], pt[2]);
    pt[wrt_slot][j] = x;
    out.col(j) = (gp - gm) / (2.0 * h);
  }
  return out;
}

void require_consistent_triples(const VakonomicProblem2& p, const ConfigPoint& q0,
                                const ConfigPoint& q1, const ConfigPoint& q2,
                                const ConfigPoint& q3, Scalar tol, const char* what) {
  const Scalar v0 = p.phi(q0, q1, q2).lpNorm<Eigen::Infinity>();
  const Scalar v1 = p.phi(q1, q2, q3).lpNorm<Eigen::Infinity>();
  const Scalar worst = std::max(v0, v1);
  if (worst > tol)
    throw InconsistentSeed(std::string(what) + ": window triples violate constraints by " +
                           std::to_string(worst) + " (tolerance " + std::to_string(tol) + ")");
}

Step2Result step2_unchecked(const VakonomicProblem2& p, const FlowWindow& w,
                            const SolverSettings& settings) {
  auto residual = [&](const Vector& xi) {
    const ConfigPoint q_next = xi.head(p.n);
    const Vector lam = xi.tail(p.m);
    return residual2(p, w.q[0], w.q[1], w.q[2], w.q[3], q_next, w.lam_prev2, w.lam_prev1, lam,
                     settings);
  };
  auto jacobian = [&](const Vector& xi) {
    const ConfigPoint q_next = xi.head(p.n);
    const Vector lam = xi.tail(p.m);
    Matrix J = Matrix::Zero(p.n + p.m, p.n + p.m);
    J.topLeftCorner(p.n, p.n) = p.mixed_second(0, 2, w.q[2], w.q[3], q_next, lam, settings);
    if (p.m > 0) {
      J.topRightCorner(p.n, p.m) = p.jac_phi(0, w.q[2], w.q[3], q_next, settings).transpose();
      J.bottomLeftCorner(p.m, p.n) = p.jac_phi(2, w.q[2], w.q[3], q_next, settings);
    }
    return J;
  };

  Vector seed(p.n + p.m);
  seed.head(p.n) = 2.0 * w.q[3] - w.q[2];
  seed.tail(p.m) = w.lam_prev1;

  Step2Result out{ConfigPoint(), Vector(), {}};
  const Vector sol =
      damped_newton(residual, jacobian, seed, settings, settings.newton_tol, "step2", &out.stats);
  out.q_next = sol.head(p.n);
  out.lam = sol.tail(p.m);
  return out;
}

}  // namespace

Vector VakonomicProblem2::phi(const ConfigPoint& x, const ConfigPoint& y,
                              const ConfigPoint& z) const {
  if (m == 0) return Vector(0);
  const std::array<ConfigPoint, 3> pt{x, y, z};
  return constraints.eval(pt);
}

Vector VakonomicProblem2::grad_L(int slot, const ConfigPoint& x, const ConfigPoint& y,
                                 const ConfigPoint& z, const SolverSettings& settings) const {
  const auto& supplier = (slot == 0) ? d1_lagrangian : (slot == 1) ? d2_lagrangian : d3_lagrangian;
  if (supplier) return supplier(x, y, z);
  const std::array<ConfigPoint, 3> pt{x, y, z};
  return fd_partial(lagrangian, slot, pt, settings);
}

Matrix VakonomicProblem2::jac_phi(int slot, const ConfigPoint& x, const ConfigPoint& y,
                                  const ConfigPoint& z, const SolverSettings& settings) const {
  if (m == 0) return Matrix(0, n);
  const auto& supplier =
      (slot == 0) ? jac1_constraints : (slot == 1) ? jac2_constraints : jac3_constraints;
  if (supplier) return supplier(x, y, z);
  const std::array<ConfigPoint, 3> pt{x, y, z};
  return fd_partial(constraints, slot, pt, settings);
}

Matrix VakonomicProblem2::mixed_second(int slot_i, int slot_j, const ConfigPoint& x,
                                       const ConfigPoint& y, const ConfigPoint& z,
                                       const Vector& lam, const SolverSettings& settings) const {
  if (slot_i > slot_j)
    return mixed_second(slot_j, slot_i, x, y, z, lam, settings).transpose();

  const std::array<ConfigPoint, 3> pt{x, y, z};
  Matrix block;
  if (slot_i == 0 && slot_j == 2 && d13_lagrangian) {
    block = d13_lagrangian(x, y, z);
  } else {
    const auto& supplier =
        (slot_i == 0) ? d1_lagrangian : (slot_i == 1) ? d2_lagrangian : d3_lagrangian;
    if (supplier) {
      block = fd_of_grad3(supplier, pt, slot_j, settings);
    } else {
      block = fd_mixed_second(lagrangian, slot_i, slot_j, pt, settings);
    }
  }
  if (m == 0) return block;

  if (slot_i == 0 && slot_j == 2 && d13_constraints) return block + d13_constraints(x, y, z, lam);
  const auto& jac =
      (slot_i == 0) ? jac1_constraints : (slot_i == 1) ? jac2_constraints : jac3_constraints;
  if (jac) {
    auto contracted = [&jac, &lam](const ConfigPoint& a, const ConfigPoint& b,
                                   const ConfigPoint& c) -> Vector {
      return jac(a, b, c).transpose() * lam;
    };
    return block + fd_of_grad3(contracted, pt, slot_j, settings);
  }
  Vector lam_copy = lam;
  auto eval = constraints.eval;
  SlottedScalarFn scalar{3, n, [eval, lam_copy](std::span<const ConfigPoint> w) {
                           return lam_copy.dot(eval(w));
                         }};
  return block + fd_mixed_second(scalar, slot_i, slot_j, pt, settings);
}

Vector residual2(const VakonomicProblem2& p, const ConfigPoint& q_km2, const ConfigPoint& q_km1,
                 const ConfigPoint& q_k, const ConfigPoint& q_kp1, const ConfigPoint& q_kp2,
                 const Vector& lam_km2, const Vector& lam_km1, const Vector& lam_k,
                 const SolverSettings& settings) {
  for (const auto* q : {&q_km2, &q_km1, &q_k, &q_kp1, &q_kp2}) check_config(p, *q, "residual2");
  for (const auto* l : {&lam_km2, &lam_km1, &lam_k}) check_lam(p, *l, "residual2");

  Vector r(p.n + p.m);
  r.head(p.n) = p.grad_L(2, q_km2, q_km1, q_k, settings) +
                p.grad_L(1, q_km1, q_k, q_kp1, settings) +
                p.grad_L(0, q_k, q_kp1, q_kp2, settings);
  if (p.m > 0) {
    r.head(p.n) += p.jac_phi(2, q_km2, q_km1, q_k, settings).transpose() * lam_km2 +
                   p.jac_phi(1, q_km1, q_k, q_kp1, settings).transpose() * lam_km1 +
                   p.jac_phi(0, q_k, q_kp1, q_kp2, settings).transpose() * lam_k;
  }
  r.tail(p.m) = p.phi(q_k, q_kp1, q_kp2);
  return r;
}

Kkt2Result kkt2(const VakonomicProblem2& p, const ConfigPoint& x, const ConfigPoint& y,
                const ConfigPoint& z, const Vector& lam, const SolverSettings& settings) {
  for (const auto* q : {&x, &y, &z}) check_config(p, *q, "kkt2");
  check_lam(p, lam, "kkt2");

  Kkt2Result out;
  out.mat = Matrix::Zero(p.n + p.m, p.n + p.m);
  out.mat.topLeftCorner(p.n, p.n) = p.mixed_second(0, 2, x, y, z, lam, settings);
  if (p.m > 0) {
    out.mat.topRightCorner(p.n, p.m) = p.jac_phi(0, x, y, z, settings).transpose();
    out.mat.bottomLeftCorner(p.m, p.n) = p.jac_phi(2, x, y, z, settings);
  }
  out.det = Eigen::PartialPivLU<Matrix>(out.mat).determinant();
  return out;
}

Step2Result step2(const VakonomicProblem2& p, const FlowWindow& w, const SolverSettings& settings) {
  for (const auto& q : w.q) check_config(p, q, "step2");
  check_lam(p, w.lam_prev2, "step2");
  check_lam(p, w.lam_prev1, "step2");
  require_consistent_triples(p, w.q[0], w.q[1], w.q[2], w.q[3], 10.0 * settings.newton_tol,
                             "step2");
  return step2_unchecked(p, w, settings);
}

ConfigPoint project_onto_constraint(const VakonomicProblem2& p, const ConfigPoint& x,
                                    const ConfigPoint& y, ConfigPoint z,
                                    const SolverSettings& settings) {
  if (p.m == 0) return z;
  for (int iter = 0; iter < settings.max_iter; ++iter) {
    const Vector r = p.phi(x, y, z);
    if (r.lpNorm<Eigen::Infinity>() <= settings.newton_tol) return z;
    const Matrix J = p.jac_phi(2, x, y, z, settings);
    const Vector w =
        lu_solve_checked(J * J.transpose(), r, settings.singular_tol, "constraint projection");
    z -= J.transpose() * w;
  }
  throw NoConvergence("constraint projection did not converge", settings.max_iter, 0.0);
}

Flow2Result flow2(const VakonomicProblem2& p, const ConfigPoint& q0, const ConfigPoint& q1,
                  const ConfigPoint& q2, const ConfigPoint& q3, const Vector& lam0,
                  const Vector& lam1, int N, const SolverSettings& settings, Scalar seed_tol) {
  for (const auto* q : {&q0, &q1, &q2, &q3}) check_config(p, *q, "flow2");
  check_lam(p, lam0, "flow2");
  check_lam(p, lam1, "flow2");
  if (N < 4) throw std::invalid_argument("flow2: N must be at least 4, got " + std::to_string(N));
  if (seed_tol < 0) seed_tol = 10.0 * settings.newton_tol;
  require_consistent_triples(p, q0, q1, q2, q3, seed_tol, "flow2");

  std::vector<ConfigPoint> points{q0, q1, q2, q3};
  std::vector<Vector> lams{lam0, lam1};
  points.reserve(N + 1);
  lams.reserve(N - 1);
  for (int k = 2; k <= N - 2; ++k) {
    FlowWindow w{{points[k - 2], points[k - 1], points[k], points[k + 1]}, lams[k - 2],
                 lams[k - 1]};
    const std::string at = "flow2 step " + std::to_string(k) + ": ";
    try {
      Step2Result step = step2_unchecked(p, w, settings);
      points.push_back(std::move(step.q_next));
      lams.push_back(std::move(step.lam));
    } catch (const SingularKkt& e) {
      throw SingularKkt(at + e.what(), e.pivot);
    } catch (const NoConvergence& e) {
      throw NoConvergence(at + e.what(), e.iterations, e.residual);
    } catch (const SolverError& e) {
      throw NumericDomainError(at + e.what());
    }
  }
  return {DiscretePath(std::move(points), p.h), MultiplierSeq(std::move(lams))};
}

}  // namespace vakon
