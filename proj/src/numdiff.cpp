#include "vakon/numdiff.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "vakon/errors.hpp"

namespace vakon {

namespace {

void check_slot(int slot, int arity) {
  if (slot < 0 || slot >= arity)
    throw std::out_of_range("slot " + std::to_string(slot) + " outside [0," +
                            std::to_string(arity) + ")");
}

void check_point(std::span<const ConfigPoint> point, int arity, int dim) {
  if (static_cast<int>(point.size()) != arity)
    throw std::invalid_argument("expected " + std::to_string(arity) + " slots, got " +
                                std::to_string(point.size()));
  for (int s = 0; s < arity; ++s)
    if (point[s].size() != dim)
      throw std::invalid_argument("slot " + std::to_string(s) + " has dimension " +
                                  std::to_string(point[s].size()) + ", expected " +
                                  std::to_string(dim));
}

[[noreturn]] void throw_nonfinite(int slot, int coord) {
  throw NumericDomainError("non-finite evaluation while perturbing slot " +
                           std::to_string(slot) + ", coordinate " + std::to_string(coord));
}

}  // namespace

Vector fd_partial(const SlottedScalarFn& f, int slot, std::span<const ConfigPoint> point,
                  const SolverSettings& settings) {
  check_slot(slot, f.arity);
  check_point(point, f.arity, f.dim);

  std::vector<ConfigPoint> work(point.begin(), point.end());
  Vector grad(f.dim);
  for (int i = 0; i < f.dim; ++i) {
    const Scalar x = point[slot][i];
    const Scalar h = settings.fd_step_first * (1.0 + std::abs(x));
    work[slot][i] = x + h;
    const Scalar fp = f.eval(work);
    work[slot][i] = x - h;
    const Scalar fm = f.eval(work);
    work[slot][i] = x;
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw_nonfinite(slot, i);
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

Matrix fd_partial(const SlottedVectorFn& f, int slot, std::span<const ConfigPoint> point,
                  const SolverSettings& settings) {
  check_slot(slot, f.arity);
  check_point(point, f.arity, f.dim);

  std::vector<ConfigPoint> work(point.begin(), point.end());
  Matrix jac(f.m, f.dim);
  for (int i = 0; i < f.dim; ++i) {
    const Scalar x = point[slot][i];
    const Scalar h = settings.fd_step_first * (1.0 + std::abs(x));
    work[slot][i] = x + h;
    const Vector fp = f.eval(work);
    work[slot][i] = x - h;
    const Vector fm = f.eval(work);
    work[slot][i] = x;
    if (fp.size() != f.m || fm.size() != f.m)
      throw std::invalid_argument("vector function returned length " + std::to_string(fp.size()) +
                                  ", expected " + std::to_string(f.m));
    if (!all_finite(fp) || !all_finite(fm)) throw_nonfinite(slot, i);
    jac.col(i) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

Matrix fd_mixed_second(const SlottedScalarFn& f, int slot_i, int slot_j,
                       std::span<const ConfigPoint> point, const SolverSettings& settings) {
  check_slot(slot_i, f.arity);
  check_slot(slot_j, f.arity);
  check_point(point, f.arity, f.dim);

  std::vector<ConfigPoint> work(point.begin(), point.end());
  auto probe = [&](int a, Scalar da, int b, Scalar db) {
    // Perturb coordinate a of slot_i, then b of slot_j; order matters when
    // the slots coincide, so apply the second shift on top of the first.
    const Scalar xa = work[slot_i][a];
    work[slot_i][a] = xa + da;
    const Scalar xb = work[slot_j][b];
    work[slot_j][b] = xb + db;
    const Scalar v = f.eval(work);
    work[slot_j][b] = xb;
    work[slot_i][a] = xa;
    if (!std::isfinite(v)) throw_nonfinite(slot_j, b);
    return v;
  };

  Matrix hess(f.dim, f.dim);
  for (int a = 0; a < f.dim; ++a) {
    const Scalar ha = settings.fd_step_second * (1.0 + std::abs(point[slot_i][a]));
    for (int b = 0; b < f.dim; ++b) {
      const Scalar hb = settings.fd_step_second * (1.0 + std::abs(point[slot_j][b]));
      const Scalar fpp = probe(a, +ha, b, +hb);
      const Scalar fpm = probe(a, +ha, b, -hb);
      const Scalar fmp = probe(a, -ha, b, +hb);
      const Scalar fmm = probe(a, -ha, b, -hb);
      hess(a, b) = ((fpp - fpm) - (fmp - fmm)) / (4.0 * ha * hb);
    }
  }
  return hess;
}

Scalar check_derivatives(const std::function<Vector(std::span<const ConfigPoint>)>& analytic,
                         const SlottedScalarFn& f, int slot,
                         std::span<const std::vector<ConfigPoint>> samples,
                         const SolverSettings& settings) {
  if (samples.empty()) throw std::invalid_argument("check_derivatives: empty sample list");
  Scalar worst = 0.0;
  for (const auto& sample : samples) {
    const Vector a = analytic(sample);
    const Vector fd = fd_partial(f, slot, sample, settings);
    if (a.size() != fd.size())
      throw std::invalid_argument("check_derivatives: analytic gradient has length " +
                                  std::to_string(a.size()) + ", expected " +
                                  std::to_string(fd.size()));
    const Scalar err = (a - fd).lpNorm<Eigen::Infinity>() / (1.0 + a.lpNorm<Eigen::Infinity>());
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace vakon
