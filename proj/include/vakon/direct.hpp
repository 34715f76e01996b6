#pragma once

#include <optional>
#include <vector>

#include "vakon/newton.hpp"
#include "vakon/second_order.hpp"
#include "vakon/types.hpp"

namespace vakon {

/// Pinned boundary nodes of the direct solve: the first and last two points
/// of the path q_0..q_N.
struct BoundaryData {
  ConfigPoint q0, q1, qNm1, qN;
};

/// Unknowns of the global first-order system: the interior points
/// q_2..q_{N-2} (N-3 of them) and one multiplier per constraint window,
/// lambda^0..lambda^{N-2} (N-1 of them).
struct GlobalVars {
  std::vector<ConfigPoint> interior;
  std::vector<Vector> multipliers;
};

struct DirectResult {
  DiscretePath path;
  MultiplierSeq multipliers;
  NewtonStats stats;
};

/// Stacked first-order conditions of the boundary-pinned constrained action:
/// stationarity rows at k = 2..N-2 (the top rows of residual2) followed by
/// the constraint rows at k = 0..N-2. Square: (N-3) n + (N-1) m entries.
Vector global_residual(const VakonomicProblem2& p, const BoundaryData& boundary,
                       const GlobalVars& vars, int N, const SolverSettings& settings = {});

/// Linear interpolation between q1 and qNm1 for the interior, zero
/// multipliers.
GlobalVars default_direct_guess(const VakonomicProblem2& p, const BoundaryData& boundary, int N);

/// Damped Newton on global_residual with a banded-structure-aware dense
/// Jacobian assembled block-wise from the problem's derivative accessors.
/// N must be at least 4.
DirectResult solve_direct(const VakonomicProblem2& p, const BoundaryData& boundary, int N,
                          const std::optional<GlobalVars>& guess = std::nullopt,
                          const SolverSettings& settings = {});

}  // namespace vakon
