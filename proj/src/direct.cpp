#include "vakon/direct.hpp"

#include <string>
#include <utility>

#include "vakon/errors.hpp"

namespace vakon {

namespace {

void check_inputs(const VakonomicProblem2& p, const BoundaryData& b, int N, const char* what) {
  if (N < 4)
    throw std::invalid_argument(std::string(what) + ": N must be at least 4, got " +
                                std::to_string(N));
  for (const auto* q : {&b.q0, &b.q1, &b.qNm1, &b.qN})
    if (q->size() != p.n)
      throw std::invalid_argument(std::string(what) + ": boundary dimension mismatch (n = " +
                                  std::to_string(p.n) + ")");
}

void check_vars(const VakonomicProblem2& p, const GlobalVars& vars, int N, const char* what) {
  if (static_cast<int>(vars.interior.size()) != N - 3)
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(N - 3) +
                                " interior points, got " + std::to_string(vars.interior.size()));
  if (static_cast<int>(vars.multipliers.size()) != N - 1)
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(N - 1) +
                                " multipliers, got " + std::to_string(vars.multipliers.size()));
  for (const auto& q : vars.interior)
    if (q.size() != p.n)
      throw std::invalid_argument(std::string(what) + ": interior point dimension mismatch");
  for (const auto& lam : vars.multipliers)
    if (lam.size() != p.m)
      throw std::invalid_argument(std::string(what) + ": multiplier length mismatch");
}

// Full node sequence q_0..q_N with the boundary pinned.
std::vector<ConfigPoint> assemble_points(const BoundaryData& b, const GlobalVars& vars, int N) {
  std::vector<ConfigPoint> q;
  q.reserve(N + 1);
  q.push_back(b.q0);
  q.push_back(b.q1);
  for (const auto& pt : vars.interior) q.push_back(pt);
  q.push_back(b.qNm1);
  q.push_back(b.qN);
  return q;
}

Vector pack(const GlobalVars& vars, int n, int m) {
  const int ni = static_cast<int>(vars.interior.size());
  const int nl = static_cast<int>(vars.multipliers.size());
  Vector x(ni * n + nl * m);
  for (int j = 0; j < ni; ++j) x.segment(j * n, n) = vars.interior[j];
  for (int j = 0; j < nl; ++j) x.segment(ni * n + j * m, m) = vars.multipliers[j];
  return x;
}

GlobalVars unpack(const Vector& x, int n, int m, int N) {
  GlobalVars vars;
  vars.interior.resize(N - 3);
  vars.multipliers.resize(N - 1);
  for (int j = 0; j < N - 3; ++j) vars.interior[j] = x.segment(j * n, n);
  for (int j = 0; j < N - 1; ++j) vars.multipliers[j] = x.segment((N - 3) * n + j * m, m);
  return vars;
}

}  // namespace

Vector global_residual(const VakonomicProblem2& p, const BoundaryData& boundary,
                       const GlobalVars& vars, int N, const SolverSettings& settings) {
  check_inputs(p, boundary, N, "global_residual");
  check_vars(p, vars, N, "global_residual");

  const std::vector<ConfigPoint> q = assemble_points(boundary, vars, N);
  const auto& lam = vars.multipliers;
  const int n = p.n, m = p.m;

  Vector r((N - 3) * n + (N - 1) * m);
  for (int k = 2; k <= N - 2; ++k) {
    Vector row = p.grad_L(2, q[k - 2], q[k - 1], q[k], settings) +
                 p.grad_L(1, q[k - 1], q[k], q[k + 1], settings) +
                 p.grad_L(0, q[k], q[k + 1], q[k + 2], settings);
    if (m > 0) {
      row += p.jac_phi(2, q[k - 2], q[k - 1], q[k], settings).transpose() * lam[k - 2] +
             p.jac_phi(1, q[k - 1], q[k], q[k + 1], settings).transpose() * lam[k - 1] +
             p.jac_phi(0, q[k], q[k + 1], q[k + 2], settings).transpose() * lam[k];
    }
    r.segment((k - 2) * n, n) = row;
  }
  for (int k = 0; k <= N - 2; ++k)
    r.segment((N - 3) * n + k * m, m) = p.phi(q[k], q[k + 1], q[k + 2]);
  return r;
}

GlobalVars default_direct_guess(const VakonomicProblem2& p, const BoundaryData& boundary, int N) {
  check_inputs(p, boundary, N, "default_direct_guess");
  GlobalVars vars;
  vars.interior.reserve(N - 3);
  for (int j = 2; j <= N - 2; ++j) {
    const Scalar t = static_cast<Scalar>(j - 1) / static_cast<Scalar>(N - 2);
    vars.interior.push_back((1.0 - t) * boundary.q1 + t * boundary.qNm1);
  }
  vars.multipliers.assign(N - 1, Vector::Zero(p.m));
  return vars;
}

DirectResult solve_direct(const VakonomicProblem2& p, const BoundaryData& boundary, int N,
                          const std::optional<GlobalVars>& guess, const SolverSettings& settings) {
  check_inputs(p, boundary, N, "solve_direct");
  GlobalVars start = guess ? *guess : default_direct_guess(p, boundary, N);
  check_vars(p, start, N, "solve_direct");

  const int n = p.n, m = p.m;
  const int stat_rows = (N - 3) * n;

  auto residual = [&](const Vector& x) {
    return global_residual(p, boundary, unpack(x, n, m, N), N, settings);
  };

  auto jacobian = [&](const Vector& x) {
    const GlobalVars vars = unpack(x, n, m, N);
    const std::vector<ConfigPoint> q = assemble_points(boundary, vars, N);
    const auto& lam = vars.multipliers;
    Matrix J = Matrix::Zero(stat_rows + (N - 1) * m, stat_rows + (N - 1) * m);

    auto q_col = [&](int j) { return (j - 2) * n; };                 // interior point columns
    auto lam_col = [&](int j) { return stat_rows + j * m; };        // multiplier columns
    auto interior = [&](int j) { return j >= 2 && j <= N - 2; };

    for (int k = 2; k <= N - 2; ++k) {
      const int row = (k - 2) * n;
      // The stationarity row at k touches the triples T_{k-2}, T_{k-1}, T_k;
      // each triple contributes its mixed second derivatives to the point
      // columns it contains.
      for (int t = k - 2; t <= k; ++t) {
        const int row_slot = k - t;  // slot of q_k within T_t
        for (int s = 0; s < 3; ++s) {
          const int j = t + s;
          if (!interior(j)) continue;
          J.block(row, q_col(j), n, n) +=
              p.mixed_second(row_slot, s, q[t], q[t + 1], q[t + 2], lam[t], settings);
        }
        if (m > 0)
          J.block(row, lam_col(t), n, m) =
              p.jac_phi(row_slot, q[t], q[t + 1], q[t + 2], settings).transpose();
      }
    }
    for (int k = 0; k <= N - 2 && m > 0; ++k) {
      const int row = stat_rows + k * m;
      for (int s = 0; s < 3; ++s) {
        const int j = k + s;
        if (!interior(j)) continue;
        J.block(row, q_col(j), m, n) = p.jac_phi(s, q[k], q[k + 1], q[k + 2], settings);
      }
    }
    return J;
  };

  NewtonStats stats;
  const Vector sol = damped_newton(residual, jacobian, pack(start, n, m), settings,
                                   settings.newton_tol, "solve_direct", &stats);

  const GlobalVars final_vars = unpack(sol, n, m, N);
  return {DiscretePath(assemble_points(boundary, final_vars, N), p.h),
          MultiplierSeq(final_vars.multipliers), stats};
}

}  // namespace vakon
