#include "vakon/first_order.hpp"

#include <array>
#include <cmath>
#include <string>

#include "vakon/errors.hpp"

namespace vakon {

namespace {

void check_dims(const VakonomicProblem1& p, const ConfigPoint& a, const ConfigPoint& b,
                const Vector& lam, const char* what) {
  if (a.size() != p.n || b.size() != p.n)
    throw std::invalid_argument(std::string(what) + ": configuration dimension mismatch (n = " +
                                std::to_string(p.n) + ")");
  if (lam.size() != p.m)
    throw std::invalid_argument(std::string(what) + ": multiplier length " +
                                std::to_string(lam.size()) + ", expected m = " +
                                std::to_string(p.m));
}

// Central difference of an analytic slot gradient with respect to the other
// slot; accurate to ~sqrt(eps) since the inner gradient is exact.
Matrix fd_of_grad(const std::function<Vector(const ConfigPoint&, const ConfigPoint&)>& grad,
                  const ConfigPoint& a, const ConfigPoint& b, int wrt_slot,
                  const SolverSettings& settings) {
  const int n = static_cast<int>(a.size());
  Matrix out(n, n);
  ConfigPoint pa = a, pb = b;
  ConfigPoint& target = (wrt_slot == 0) ? pa : pb;
  const ConfigPoint& base = (wrt_slot == 0) ? a : b;
  for (int j = 0; j < n; ++j) {
    const Scalar x = base[j];
    const Scalar h = settings.fd_step_first * (1.0 + std::abs(x));
    target[j] = x + h;
    const Vector gp = grad(pa, pb);
    target[j] = x - h;
    const Vector gm = grad(pa, pb);
    target[j] = x;
    out.col(j) = (gp - gm) / (2.0 * h);
  }
  return out;
}

}  // namespace

Vector VakonomicProblem1::phi(const ConfigPoint& a, const ConfigPoint& b) const {
  if (m == 0) return Vector(0);
  const std::array<ConfigPoint, 2> pt{a, b};
  return constraints.eval(pt);
}

Vector VakonomicProblem1::grad_L(int slot, const ConfigPoint& a, const ConfigPoint& b,
                                 const SolverSettings& settings) const {
  const auto& supplier = (slot == 0) ? d1_lagrangian : d2_lagrangian;
  if (supplier) return supplier(a, b);
  const std::array<ConfigPoint, 2> pt{a, b};
  return fd_partial(lagrangian, slot, pt, settings);
}

Matrix VakonomicProblem1::jac_phi(int slot, const ConfigPoint& a, const ConfigPoint& b,
                                  const SolverSettings& settings) const {
  if (m == 0) return Matrix(0, n);
  const auto& supplier = (slot == 0) ? jac1_constraints : jac2_constraints;
  if (supplier) return supplier(a, b);
  const std::array<ConfigPoint, 2> pt{a, b};
  return fd_partial(constraints, slot, pt, settings);
}

Matrix VakonomicProblem1::mixed12(const ConfigPoint& a, const ConfigPoint& b, const Vector& lam,
                                  const SolverSettings& settings) const {
  Matrix block;
  if (d12_lagrangian) {
    block = d12_lagrangian(a, b);
  } else if (d1_lagrangian) {
    block = fd_of_grad(d1_lagrangian, a, b, 1, settings);
  } else {
    const std::array<ConfigPoint, 2> pt{a, b};
    block = fd_mixed_second(lagrangian, 0, 1, pt, settings);
  }
  if (m == 0) return block;

  if (d12_constraints) return block + d12_constraints(a, b, lam);
  if (jac1_constraints) {
    auto contracted = [&](const ConfigPoint& x, const ConfigPoint& y) -> Vector {
      return jac1_constraints(x, y).transpose() * lam;
    };
    return block + fd_of_grad(contracted, a, b, 1, settings);
  }
  Vector lam_copy = lam;
  SlottedScalarFn scalar{2, n, [this, lam_copy](std::span<const ConfigPoint> pt) {
                           return lam_copy.dot(constraints.eval(pt));
                         }};
  const std::array<ConfigPoint, 2> pt{a, b};
  return block + fd_mixed_second(scalar, 0, 1, pt, settings);
}

Vector residual1(const VakonomicProblem1& p, const ConfigPoint& q_prev, const ConfigPoint& q,
                 const ConfigPoint& q_next, const Vector& lam_prev, const Vector& lam,
                 const SolverSettings& settings) {
  check_dims(p, q_prev, q, lam_prev, "residual1");
  check_dims(p, q, q_next, lam, "residual1");

  Vector r(p.n + p.m);
  r.head(p.n) = p.grad_L(0, q, q_next, settings) + p.grad_L(1, q_prev, q, settings);
  if (p.m > 0) {
    r.head(p.n) += p.jac_phi(0, q, q_next, settings).transpose() * lam +
                   p.jac_phi(1, q_prev, q, settings).transpose() * lam_prev;
  }
  r.tail(p.m) = p.phi(q, q_next);
  return r;
}

KktMatrix kkt1(const VakonomicProblem1& p, const ConfigPoint& x, const ConfigPoint& y,
               const Vector& lam, const SolverSettings& settings) {
  check_dims(p, x, y, lam, "kkt1");
  KktMatrix out;
  out.mat = Matrix::Zero(p.n + p.m, p.n + p.m);
  out.mat.topLeftCorner(p.n, p.n) = p.mixed12(x, y, lam, settings);
  if (p.m > 0) {
    out.mat.topRightCorner(p.n, p.m) = p.jac_phi(0, x, y, settings).transpose();
    out.mat.bottomLeftCorner(p.m, p.n) = p.jac_phi(1, x, y, settings);
  }
  out.det = Eigen::PartialPivLU<Matrix>(out.mat).determinant();
  return out;
}

Step1Result step1(const VakonomicProblem1& p, const ConfigPoint& q_prev, const ConfigPoint& q,
                  const Vector& lam_prev, const SolverSettings& settings) {
  check_dims(p, q_prev, q, lam_prev, "step1");

  auto unpack = [&](const Vector& xi) {
    return std::pair<ConfigPoint, Vector>(xi.head(p.n), xi.tail(p.m));
  };
  auto residual = [&](const Vector& xi) {
    auto [q_next, lam] = unpack(xi);
    return residual1(p, q_prev, q, q_next, lam_prev, lam, settings);
  };
  auto jacobian = [&](const Vector& xi) {
    auto [q_next, lam] = unpack(xi);
    Matrix J = Matrix::Zero(p.n + p.m, p.n + p.m);
    J.topLeftCorner(p.n, p.n) = p.mixed12(q, q_next, lam, settings);
    if (p.m > 0) {
      J.topRightCorner(p.n, p.m) = p.jac_phi(0, q, q_next, settings).transpose();
      J.bottomLeftCorner(p.m, p.n) = p.jac_phi(1, q, q_next, settings);
    }
    return J;
  };

  Vector seed(p.n + p.m);
  seed.head(p.n) = 2.0 * q - q_prev;
  seed.tail(p.m) = lam_prev;

  Step1Result out{ConfigPoint(), Vector(), {}};
  const Vector sol =
      damped_newton(residual, jacobian, seed, settings, settings.newton_tol, "step1", &out.stats);
  out.q_next = sol.head(p.n);
  out.lam = sol.tail(p.m);
  return out;
}

Flow1Result flow1(const VakonomicProblem1& p, const ConfigPoint& q0, const ConfigPoint& q1,
                  const Vector& lam0, int N, const SolverSettings& settings) {
  check_dims(p, q0, q1, lam0, "flow1");
  if (N < 0) throw std::invalid_argument("flow1: N must be nonnegative, got " + std::to_string(N));

  const Scalar seed_violation = p.phi(q0, q1).lpNorm<Eigen::Infinity>();
  if (seed_violation > 10.0 * settings.newton_tol)
    throw InconsistentSeed("flow1: seed pair violates constraints by " +
                           std::to_string(seed_violation));

  std::vector<ConfigPoint> points{q0, q1};
  std::vector<Vector> lams{lam0};
  points.reserve(std::max(N + 1, 2));
  for (int k = 1; k < N; ++k) {
    Step1Result step = step1(p, points[k - 1], points[k], lams[k - 1], settings);
    points.push_back(std::move(step.q_next));
    lams.push_back(std::move(step.lam));
  }
  return {DiscretePath(std::move(points), p.h), MultiplierSeq(std::move(lams))};
}

}  // namespace vakon
