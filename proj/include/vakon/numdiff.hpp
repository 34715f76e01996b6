#pragma once

#include <functional>
#include <span>

#include "vakon/types.hpp"

namespace vakon {

/// Scalar function of several configuration slots (2 for point pairs,
/// 3 for point triples). `dim` is the common slot dimension.
struct SlottedScalarFn {
  int arity = 0;
  int dim = 0;
  std::function<Scalar(std::span<const ConfigPoint>)> eval;
};

/// Vector-valued counterpart: m outputs over `arity` slots of dimension n.
struct SlottedVectorFn {
  int arity = 0;
  int dim = 0;
  int m = 0;
  std::function<Vector(std::span<const ConfigPoint>)> eval;
};

/// Gradient of f with respect to slot `slot` (0-based) at `point`, by
/// central differences with per-coordinate step fd_step_first * (1 + |x|).
/// Throws NumericDomainError when an evaluation is non-finite.
Vector fd_partial(const SlottedScalarFn& f, int slot, std::span<const ConfigPoint> point,
                  const SolverSettings& settings);

/// Jacobian (m x n) of a vector function with respect to one slot; rows are
/// the component gradients, all components share each perturbed evaluation.
Matrix fd_partial(const SlottedVectorFn& f, int slot, std::span<const ConfigPoint> point,
                  const SolverSettings& settings);

/// Matrix of mixed second partials d^2 f / d(slot_i)_a d(slot_j)_b by nested
/// central differences with step fd_step_second * (1 + |x|). Entry (a, b)
/// differentiates slot_i coordinate a and slot_j coordinate b.
Matrix fd_mixed_second(const SlottedScalarFn& f, int slot_i, int slot_j,
                       std::span<const ConfigPoint> point, const SolverSettings& settings);

/// Max over samples of the relative mismatch between an analytic slot
/// gradient and its finite-difference estimate:
///   ||analytic - fd||_inf / (1 + ||analytic||_inf).
/// Throws std::invalid_argument on an empty sample list.
Scalar check_derivatives(const std::function<Vector(std::span<const ConfigPoint>)>& analytic,
                         const SlottedScalarFn& f, int slot,
                         std::span<const std::vector<ConfigPoint>> samples,
                         const SolverSettings& settings);

}  // namespace vakon
