#include "vakon/experiments.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

#include "vakon/direct.hpp"
#include "vakon/errors.hpp"
#include "vakon/numdiff.hpp"
#include "vakon/optimal_control.hpp"
#include "vakon/second_order.hpp"

namespace vakon::experiments {

namespace {

using cartpole::CartPoleDiscrete;
using cartpole::CartPoleParams;
using cartpole::CartPoleSeed;
using cartpole::ReducedState;

std::string fmt(Scalar v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

const ConfigPoint& require_point(const std::optional<ConfigPoint>& q, const char* name) {
  if (!q) throw std::invalid_argument(std::string("missing required config key '") + name + "'");
  return *q;
}

ReducedState state_from_array(const std::array<Scalar, 8>& a) {
  ReducedState s;
  s.x = a[0];
  s.theta = a[1];
  s.xdot = a[2];
  s.thetadot = a[3];
  s.p1_theta = a[4];
  s.p1_theta_dot = a[5];
  s.pi = a[6];
  s.pi_dot = a[7];
  return s;
}

void reject_boundary_keys(const ExperimentConfig& c, const char* mode) {
  if (c.qNm1 || c.qN) {
    throw std::invalid_argument(std::string(mode) +
                                " mode takes seed data (q0..q3 or state0), not boundary data");
  }
}

/// Flow run shared by the flow and energy modes.
struct FlowData {
  CartPoleParams params;
  int N = 0;
  Scalar h = 0;
  std::vector<ConfigPoint> points;
  std::vector<Vector> lams;
  std::vector<Vector> controls;  // u_1..u_{N-1}
  TrajTable table;
  Scalar max_stat = 0, max_con = 0;
  Scalar cost = 0;
  double runtime = 0;
};

TrajTable build_table(const CartPoleDiscrete& sys, const std::vector<ConfigPoint>& points,
                      const std::vector<Vector>& lams, const std::vector<Vector>& controls,
                      Scalar h, const SolverSettings& settings, Scalar* max_stat,
                      Scalar* max_con) {
  const VakonomicProblem2& prob = sys.problem;
  const int N = static_cast<int>(points.size()) - 1;
  const int n = prob.n;
  Scalar worst_stat = 0, worst_con = 0;
  TrajTable table(static_cast<std::size_t>(N) + 1);
  for (int k = 0; k <= N; ++k) {
    TrajRow& row = table[static_cast<std::size_t>(k)];
    row.k = k;
    row.t = k * h;
    row.x = points[static_cast<std::size_t>(k)](0);
    row.theta = points[static_cast<std::size_t>(k)](1);
    if (k >= 1 && k <= N - 1 && !controls.empty()) {
      row.u = controls[static_cast<std::size_t>(k - 1)](0);
    }
    if (k <= N - 2 && k < static_cast<int>(lams.size())) {
      row.lambda = lams[static_cast<std::size_t>(k)](0);
    }
    if (k <= N - 2) {
      const auto& a = points[static_cast<std::size_t>(k)];
      const auto& b = points[static_cast<std::size_t>(k + 1)];
      const auto& c = points[static_cast<std::size_t>(k + 2)];
      const Scalar con = prob.phi(a, b, c).cwiseAbs().maxCoeff();
      row.res_con = con;
      worst_con = std::max(worst_con, con);
    }
    if (k >= 2 && k <= N - 2 && static_cast<int>(lams.size()) > k) {
      const Vector r = residual2(prob, points[static_cast<std::size_t>(k - 2)],
                                 points[static_cast<std::size_t>(k - 1)],
                                 points[static_cast<std::size_t>(k)],
                                 points[static_cast<std::size_t>(k + 1)],
                                 points[static_cast<std::size_t>(k + 2)],
                                 lams[static_cast<std::size_t>(k - 2)],
                                 lams[static_cast<std::size_t>(k - 1)],
                                 lams[static_cast<std::size_t>(k)], settings);
      const Scalar stat = r.head(n).cwiseAbs().maxCoeff();
      row.res_stat = stat;
      worst_stat = std::max(worst_stat, stat);
    }
  }
  if (max_stat != nullptr) *max_stat = worst_stat;
  if (max_con != nullptr) *max_con = worst_con;
  return table;
}

std::vector<Series> position_series(const TrajTable& table) {
  Series sx{"x", {}}, st{"theta", {}};
  for (const TrajRow& row : table) {
    sx.points.emplace_back(row.t, row.x);
    st.points.emplace_back(row.t, row.theta);
  }
  return {sx, st};
}

void write_outputs(const ExperimentConfig& config, const TrajTable& table, const std::string& title,
                   const std::vector<Series>& series, const std::string& x_label,
                   const std::string& y_label) {
  if (!config.csv.empty()) write_csv_file(config.csv, table);
  if (!config.svg.empty()) write_svg_file(config.svg, title, x_label, y_label, series);
}

FlowData flow_from_config(const ExperimentConfig& c, const char* mode) {
  reject_boundary_keys(c, mode);
  FlowData fd;
  fd.params = c.params();
  fd.N = c.N;
  fd.h = c.h;
  if (fd.N < 4) throw std::invalid_argument("N must be at least 4");
  if (fd.h <= 0) throw std::invalid_argument("h must be positive");
  const CartPoleDiscrete sys = cartpole::cp_discrete_system(fd.params, fd.h);

  CartPoleSeed seed;
  if (c.state0) {
    if (c.q0 || c.q1 || c.q2 || c.q3) {
      throw std::invalid_argument("give either state0 or explicit q0..q3, not both");
    }
    seed = cartpole::cp_seed_from_reference(fd.params, fd.h, state_from_array(*c.state0), fd.N,
                                            c.settings);
    if (c.lam0) seed.lam0 = Vector::Constant(1, *c.lam0);
    if (c.lam1) seed.lam1 = Vector::Constant(1, *c.lam1);
  } else {
    seed.q0 = require_point(c.q0, "q0");
    seed.q1 = require_point(c.q1, "q1");
    seed.q2 = require_point(c.q2, "q2");
    seed.q3 = require_point(c.q3, "q3");
    if (c.project_seed) {
      seed.q2 = project_onto_constraint(sys.problem, seed.q0, seed.q1, seed.q2, c.settings);
      seed.q3 = project_onto_constraint(sys.problem, seed.q1, seed.q2, seed.q3, c.settings);
    }
    seed.lam0 = Vector::Constant(1, c.lam0.value_or(0.0));
    seed.lam1 = Vector::Constant(1, c.lam1.value_or(0.0));
  }

  const auto start = std::chrono::steady_clock::now();
  const Flow2Result flow = flow2(sys.problem, seed.q0, seed.q1, seed.q2, seed.q3, seed.lam0,
                                 seed.lam1, fd.N, c.settings);
  fd.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  fd.points = flow.path.points();
  fd.lams = flow.multipliers.values();
  fd.controls = recover_controls(sys.system, flow.path, c.settings);
  fd.cost = total_cost(sys.system, flow.path, c.settings);
  fd.table = build_table(sys, fd.points, fd.lams, fd.controls, fd.h, c.settings, &fd.max_stat,
                         &fd.max_con);
  return fd;
}

/// Energy reconstruction from a discrete run: velocities by central
/// differences, accelerations by second differences, the continuous control
/// as the negated discrete control, the momentum p1_theta as s * lambda with
/// s fitted against a two-parameter reconstruction of the continuous
/// momentum (pi affine in t plus the momentum evolution equation).
struct EnergyCore {
  Scalar scale = 0;
  Scalar fit_residual = 0;
  int first_k = 0;                // node of H.front()
  std::vector<Scalar> H;          // k = first_k .. first_k + H.size() - 1
  Scalar pi_fit_residual = 0;     // rms deviation of reconstructed pi from a line
};

EnergyCore reconstruct_energy(const CartPoleParams& p, const std::vector<ConfigPoint>& points,
                              const std::vector<Vector>& lams,
                              const std::vector<Vector>& controls, Scalar h) {
  const int N = static_cast<int>(points.size()) - 1;
  if (N < 6) throw std::invalid_argument("energy reconstruction needs N >= 6");

  std::vector<Scalar> x(static_cast<std::size_t>(N) + 1), th(static_cast<std::size_t>(N) + 1);
  for (int k = 0; k <= N; ++k) {
    x[static_cast<std::size_t>(k)] = points[static_cast<std::size_t>(k)](0);
    th[static_cast<std::size_t>(k)] = points[static_cast<std::size_t>(k)](1);
  }
  // Continuous kinematics at the nodes (defined for k = 1..N-1).
  std::vector<Scalar> xdot(x.size(), 0), thdot(x.size(), 0), xddot(x.size(), 0), u(x.size(), 0);
  for (int k = 1; k <= N - 1; ++k) {
    const auto i = static_cast<std::size_t>(k);
    xdot[i] = (x[i + 1] - x[i - 1]) / (2 * h);
    thdot[i] = (th[i + 1] - th[i - 1]) / (2 * h);
    xddot[i] = (x[i + 1] - 2 * x[i] + x[i - 1]) / (h * h);
    u[i] = -controls[i - 1](0);  // the discrete control approximates -u(t_k)
  }

  // Two-parameter reconstruction of the continuous momentum p1_theta: with
  // pi = alpha + beta t (pi is affine along solutions) and
  // pi = u R1 + p1_theta cos(theta)/l pointwise,
  //   p1_theta(k) = a_k + alpha b_k + beta c_k,
  // and the evolution equation
  //   d/dt p1_theta = d/dt(u dF/dthetadot) - u dF/dtheta + p1_theta dG/dtheta
  // in central-difference form gives one linear equation per interior node.
  std::vector<Scalar> pa(x.size(), 0), pb(x.size(), 0), pc(x.size(), 0), uFd(x.size(), 0);
  for (int k = 1; k <= N - 1; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Scalar cth = std::cos(th[i]);
    if (std::abs(cth) < 0.1) {
      throw NumericDomainError(
          "energy reconstruction requires |cos(theta)| >= 0.1 at every interior node");
    }
    pa[i] = -p.l * u[i] * cartpole::cp_R1(p, th[i]) / cth;
    pb[i] = p.l / cth;
    pc[i] = p.l * (k * h) / cth;
    uFd[i] = u[i] * cartpole::cp_bracket_dthetadot(p, th[i], thdot[i]);
  }
  Matrix A = Matrix::Zero(std::max(N - 3, 0), 2);
  Vector rhs = Vector::Zero(std::max(N - 3, 0));
  for (int k = 2; k <= N - 2; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Scalar Gth = cartpole::cp_G_dtheta(p, th[i], xddot[i]);
    const Scalar Fth = cartpole::cp_bracket_dtheta(p, th[i], thdot[i], xddot[i]);
    const Scalar K = (uFd[i + 1] - uFd[i - 1]) / (2 * h) - u[i] * Fth;
    A(k - 2, 0) = (pb[i + 1] - pb[i - 1]) / (2 * h) - Gth * pb[i];
    A(k - 2, 1) = (pc[i + 1] - pc[i - 1]) / (2 * h) - Gth * pc[i];
    rhs(k - 2) = K - (pa[i + 1] - pa[i - 1]) / (2 * h) + Gth * pa[i];
  }
  const Vector ab = A.colPivHouseholderQr().solve(rhs);
  const Scalar alpha = ab(0), beta = ab(1);

  // Least-squares scale between the discrete multipliers and the
  // reconstructed momentum samples.
  Scalar num = 0, den = 0;
  for (int k = 1; k <= N - 2; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Scalar pref = pa[i] + alpha * pb[i] + beta * pc[i];
    const Scalar lam = lams[i](0);
    num += lam * pref;
    den += lam * lam;
  }
  EnergyCore core;
  core.scale = den > 0 ? num / den : 0.0;
  Scalar sq = 0;
  for (int k = 1; k <= N - 2; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Scalar miss = core.scale * lams[i](0) - (pa[i] + alpha * pb[i] + beta * pc[i]);
    sq += miss * miss;
  }
  core.fit_residual = std::sqrt(sq / static_cast<Scalar>(N - 2));

  // Momentum and energy series from the calibrated multipliers.
  std::vector<Scalar> p1(x.size(), 0), pi_series(x.size(), 0);
  for (int k = 0; k <= N - 2; ++k) {
    p1[static_cast<std::size_t>(k)] = core.scale * lams[static_cast<std::size_t>(k)](0);
  }
  for (int k = 1; k <= N - 2; ++k) {
    const auto i = static_cast<std::size_t>(k);
    pi_series[i] = u[i] * cartpole::cp_R1(p, th[i]) + p1[i] * std::cos(th[i]) / p.l;
  }
  core.first_k = 2;
  for (int k = 2; k <= N - 3; ++k) {
    const auto i = static_cast<std::size_t>(k);
    ReducedState s;
    s.x = x[i];
    s.theta = th[i];
    s.xdot = xdot[i];
    s.thetadot = thdot[i];
    s.p1_theta = p1[i];
    s.p1_theta_dot = (p1[i + 1] - p1[i - 1]) / (2 * h);
    s.pi = pi_series[i];
    s.pi_dot = (pi_series[i + 1] - pi_series[i - 1]) / (2 * h);
    core.H.push_back(cartpole::cp_H_W1(p, s));
  }

  // Straight-line fit of the reconstructed pi samples (k = 1..N-2).
  {
    const int count = N - 2;
    Matrix L(count, 2);
    Vector y(count);
    for (int k = 1; k <= N - 2; ++k) {
      L(k - 1, 0) = 1.0;
      L(k - 1, 1) = k * h;
      y(k - 1) = pi_series[static_cast<std::size_t>(k)];
    }
    const Vector line = L.colPivHouseholderQr().solve(y);
    const Vector res = L * line - y;
    core.pi_fit_residual = std::sqrt(res.squaredNorm() / static_cast<Scalar>(count));
  }
  return core;
}

}  // namespace

FlowRunResult run_flow(const ExperimentConfig& config) {
  const FlowData fd = flow_from_config(config, "flow");
  FlowRunResult out;
  out.table = fd.table;
  out.points = fd.points;
  out.multipliers = fd.lams;
  out.max_res_stat = fd.max_stat;
  out.max_res_con = fd.max_con;
  out.total_cost = fd.cost;
  out.runtime_seconds = fd.runtime;
  std::ostringstream os;
  os << "mode=flow N=" << fd.N << " h=" << fmt(fd.h) << " nodes=" << fd.points.size() << '\n'
     << "max_res_stat=" << fmt(fd.max_stat) << '\n'
     << "max_res_con=" << fmt(fd.max_con) << '\n'
     << "total_cost=" << fmt(fd.cost) << '\n'
     << "runtime_seconds=" << fmt(fd.runtime) << '\n';
  out.summary = os.str();
  write_outputs(config, out.table, "discrete flow trajectory", position_series(out.table), "t",
                "position");
  return out;
}

BvpRunResult run_bvp(const ExperimentConfig& config) {
  if (config.state0) throw std::invalid_argument("bvp mode takes boundary data, not state0");
  const CartPoleParams params = config.params();
  const int N = config.N;
  if (N < 4) throw std::invalid_argument("N must be at least 4");
  const ConfigPoint q0 = require_point(config.q0, "q0");
  const ConfigPoint q1 = require_point(config.q1, "q1");
  const ConfigPoint qNm1 = require_point(config.qNm1, "qNm1");
  const ConfigPoint qN = require_point(config.qN, "qN");
  const CartPoleDiscrete sys = cartpole::cp_discrete_system(params, config.h);

  ShootGuess guess;
  guess.q2 = config.q2 ? *config.q2 : ConfigPoint(q1 + (qNm1 - q1) * (1.0 / (N - 2)));
  guess.q3 = config.q3 ? *config.q3 : ConfigPoint(q1 + (qNm1 - q1) * (2.0 / (N - 2)));
  guess.lam0 = Vector::Constant(1, config.lam0.value_or(0.0));
  guess.lam1 = Vector::Constant(1, config.lam1.value_or(0.0));

  const ShootResult r = shoot_bvp(sys.problem, q0, q1, qNm1, qN, guess, N, config.settings);

  BvpRunResult out;
  out.points = r.path.points();
  out.multipliers = r.multipliers.values();
  out.converged = r.converged;
  out.stats = r.stats;
  const std::vector<Vector> controls = recover_controls(sys.system, r.path, config.settings);
  Scalar max_stat = 0, max_con = 0;
  out.table = build_table(sys, out.points, out.multipliers, controls, config.h, config.settings,
                          &max_stat, &max_con);
  out.endpoint_error =
      std::max((out.points[static_cast<std::size_t>(N - 1)] - qNm1).cwiseAbs().maxCoeff(),
               (out.points[static_cast<std::size_t>(N)] - qN).cwiseAbs().maxCoeff());
  std::ostringstream os;
  os << "mode=bvp N=" << N << " h=" << fmt(config.h) << '\n'
     << "converged=" << (out.converged ? "yes" : "no") << " iterations=" << r.stats.iterations
     << " residual=" << fmt(r.stats.residual) << '\n'
     << "endpoint_error=" << fmt(out.endpoint_error) << '\n'
     << "max_res_stat=" << fmt(max_stat) << '\n'
     << "max_res_con=" << fmt(max_con) << '\n';
  out.summary = os.str();
  write_outputs(config, out.table, "shooting boundary solve", position_series(out.table), "t",
                "position");
  return out;
}

OracleRunResult run_oracle(const ExperimentConfig& config) {
  if (config.state0) throw std::invalid_argument("oracle mode takes boundary data, not state0");
  const CartPoleParams params = config.params();
  const int N = config.N;
  if (N < 4) throw std::invalid_argument("N must be at least 4");
  if (config.homotopy < 0) throw std::invalid_argument("homotopy must be >= 0");
  BoundaryData target;
  target.q0 = require_point(config.q0, "q0");
  target.q1 = require_point(config.q1, "q1");
  target.qNm1 = require_point(config.qNm1, "qNm1");
  target.qN = require_point(config.qN, "qN");
  const CartPoleDiscrete sys = cartpole::cp_discrete_system(params, config.h);

  DirectResult dr = [&] {
    if (config.homotopy == 0) {
      return solve_direct(sys.problem, target, N, std::nullopt, config.settings);
    }
    // Boundary continuation: start from the straight-line extension of the
    // initial pair (an easy nearby problem) and walk the far boundary over
    // to the requested one, warm-starting each stage.
    BoundaryData easy = target;
    easy.qNm1 = target.q0 + (N - 1) * (target.q1 - target.q0);
    easy.qN = target.q0 + N * (target.q1 - target.q0);
    std::optional<GlobalVars> warm;
    std::optional<DirectResult> stage_result;
    for (int stage = 1; stage <= config.homotopy; ++stage) {
      const Scalar w = static_cast<Scalar>(stage) / config.homotopy;
      BoundaryData blend = target;
      blend.qNm1 = (1 - w) * easy.qNm1 + w * target.qNm1;
      blend.qN = (1 - w) * easy.qN + w * target.qN;
      stage_result = solve_direct(sys.problem, blend, N, warm, config.settings);
      GlobalVars vars;
      vars.interior.assign(stage_result->path.points().begin() + 2,
                           stage_result->path.points().end() - 2);
      vars.multipliers = stage_result->multipliers.values();
      warm = std::move(vars);
    }
    return *std::move(stage_result);
  }();

  OracleRunResult out;
  out.points = dr.path.points();
  out.multipliers = dr.multipliers.values();
  out.stats = dr.stats;
  GlobalVars vars;
  vars.interior.assign(out.points.begin() + 2, out.points.end() - 2);
  vars.multipliers = out.multipliers;
  out.max_residual =
      global_residual(sys.problem, target, vars, N, config.settings).cwiseAbs().maxCoeff();
  const std::vector<Vector> controls = recover_controls(sys.system, dr.path, config.settings);
  Scalar max_stat = 0, max_con = 0;
  out.table = build_table(sys, out.points, out.multipliers, controls, config.h, config.settings,
                          &max_stat, &max_con);
  std::ostringstream os;
  os << "mode=oracle N=" << N << " h=" << fmt(config.h) << " homotopy=" << config.homotopy << '\n'
     << "iterations=" << dr.stats.iterations << " residual=" << fmt(dr.stats.residual) << '\n'
     << "max_global_residual=" << fmt(out.max_residual) << '\n'
     << "total_cost=" << fmt(total_cost(sys.system, dr.path, config.settings)) << '\n';
  out.summary = os.str();
  write_outputs(config, out.table, "direct transcription solve", position_series(out.table), "t",
                "position");
  return out;
}

EnergyRunResult run_energy_study(const ExperimentConfig& config) {
  const FlowData fd = flow_from_config(config, "energy");
  const EnergyCore core = reconstruct_energy(fd.params, fd.points, fd.lams, fd.controls, fd.h);

  EnergyRunResult out;
  out.H = core.H;
  out.first_k = core.first_k;
  out.scale = core.scale;
  out.fit_residual = core.fit_residual;
  out.table = fd.table;
  for (std::size_t i = 0; i < core.H.size(); ++i) {
    out.table[static_cast<std::size_t>(core.first_k) + i].H = core.H[i];
  }

  const Scalar H0 = core.H.empty() ? 0 : core.H.front();
  const std::size_t early = std::min<std::size_t>(50, core.H.size());
  for (std::size_t i = 0; i < core.H.size(); ++i) {
    const Scalar dev = std::abs(core.H[i] - H0);
    if (i < early) out.early_amplitude = std::max(out.early_amplitude, dev);
    out.max_deviation = std::max(out.max_deviation, dev);
  }
  // Linear trend of the H series over time.
  if (core.H.size() >= 2) {
    Matrix L(static_cast<int>(core.H.size()), 2);
    Vector y(static_cast<int>(core.H.size()));
    for (std::size_t i = 0; i < core.H.size(); ++i) {
      L(static_cast<int>(i), 0) = 1.0;
      L(static_cast<int>(i), 1) = (core.first_k + static_cast<int>(i)) * fd.h;
      y(static_cast<int>(i)) = core.H[i];
    }
    out.trend_slope = L.colPivHouseholderQr().solve(y)(1);
  }
  constexpr Scalar kFloor = 1e-12;  // absolute slack for the degenerate flat series
  out.bounded = out.max_deviation <= 5 * out.early_amplitude + kFloor &&
                std::abs(out.trend_slope) * (fd.N * fd.h) <= out.early_amplitude + kFloor;

  std::ostringstream os;
  os << "mode=energy N=" << fd.N << " h=" << fmt(fd.h) << '\n'
     << "reconstruction: velocities central differences, accelerations second differences,\n"
     << "  p1_theta = s * lambda with s fitted least-squares against the affine-pi matched\n"
     << "  reconstruction of the continuous momentum; pi and dp1_theta/dt by central "
        "differences\n"
     << "scale_s=" << fmt(core.scale) << " fit_rms=" << fmt(core.fit_residual) << '\n'
     << "H_first=" << fmt(H0) << " early_amplitude=" << fmt(out.early_amplitude)
     << " max_deviation=" << fmt(out.max_deviation) << '\n'
     << "trend_slope=" << fmt(out.trend_slope) << " bounded=" << (out.bounded ? "yes" : "no")
     << '\n'
     << "max_res_stat=" << fmt(fd.max_stat) << " max_res_con=" << fmt(fd.max_con) << '\n';
  out.summary = os.str();

  Series hs{"H", {}};
  for (std::size_t i = 0; i < core.H.size(); ++i) {
    hs.points.emplace_back(static_cast<Scalar>(core.first_k + static_cast<int>(i)), core.H[i]);
  }
  if (!config.csv.empty()) write_csv_file(config.csv, out.table);
  if (!config.svg.empty()) {
    write_svg_file(config.svg, "reconstructed energy along the discrete flow", "step", "H", {hs});
  }
  return out;
}

ConvergenceRunResult run_convergence(const ExperimentConfig& config) {
  if (!config.state0) throw std::invalid_argument("convergence mode requires state0");
  if (config.h_list.size() < 3) {
    throw std::invalid_argument("convergence mode needs at least 3 step sizes in h_list");
  }
  const CartPoleParams params = config.params();
  const ReducedState s0 = state_from_array(*config.state0);
  const Scalar T = config.T;
  if (T <= 0) throw std::invalid_argument("T must be positive");

  ConvergenceRunResult out;
  for (const Scalar h : config.h_list) {
    if (h <= 0) throw std::invalid_argument("h_list entries must be positive");
    const auto N_long = std::llround(T / h);
    if (N_long < 6 || std::abs(static_cast<Scalar>(N_long) * h - T) > 1e-9 * std::max<Scalar>(1, T)) {
      throw std::invalid_argument("each h in h_list must divide T into at least 6 steps");
    }
    const int N = static_cast<int>(N_long);
    const CartPoleDiscrete sys = cartpole::cp_discrete_system(params, h);
    const CartPoleSeed seed = cartpole::cp_seed_from_reference(params, h, s0, N, config.settings);
    const Flow2Result flow = flow2(sys.problem, seed.q0, seed.q1, seed.q2, seed.q3, seed.lam0,
                                   seed.lam1, N, config.settings);
    constexpr int kSub = 100;
    const std::vector<ReducedState> ref = cartpole::rk4_integrate(params, s0, h / kSub, N * kSub);
    Scalar err = 0;
    for (int k = 0; k <= N; ++k) {
      const ReducedState& r = ref[static_cast<std::size_t>(k) * kSub];
      const ConfigPoint& q = flow.path[k];
      err = std::max(err, std::abs(q(0) - r.x));
      err = std::max(err, std::abs(q(1) - r.theta));
    }
    const std::vector<Vector> controls =
        recover_controls(sys.system, flow.path, config.settings);
    const EnergyCore core =
        reconstruct_energy(params, flow.path.points(), flow.multipliers.values(), controls, h);
    out.rows.push_back({h, N, err, core.pi_fit_residual});
  }

  for (std::size_t i = 0; i + 1 < out.rows.size(); ++i) {
    const Scalar hr = std::log(out.rows[i].h / out.rows[i + 1].h);
    out.position_orders.push_back(
        std::log(out.rows[i].max_position_error / out.rows[i + 1].max_position_error) / hr);
    out.pi_orders.push_back(
        std::log(out.rows[i].pi_fit_residual / out.rows[i + 1].pi_fit_residual) / hr);
  }

  std::ostringstream os;
  os << "mode=convergence T=" << fmt(T) << " steps=" << out.rows.size() << '\n';
  for (const ConvergenceRow& row : out.rows) {
    os << "h=" << fmt(row.h) << " N=" << row.N << " max_position_error="
       << fmt(row.max_position_error) << " pi_fit_rms=" << fmt(row.pi_fit_residual) << '\n';
  }
  os << "position_orders=";
  for (std::size_t i = 0; i < out.position_orders.size(); ++i) {
    os << (i ? "," : "") << fmt(out.position_orders[i]);
  }
  os << '\n' << "pi_orders=";
  for (std::size_t i = 0; i < out.pi_orders.size(); ++i) {
    os << (i ? "," : "") << fmt(out.pi_orders[i]);
  }
  os << '\n';
  out.summary = os.str();

  if (!config.svg.empty()) {
    Series se{"log10 max position error", {}};
    for (const ConvergenceRow& row : out.rows) {
      se.points.emplace_back(std::log10(row.h), std::log10(row.max_position_error));
    }
    write_svg_file(config.svg, "flow convergence against the integrated reference", "log10 h",
                   "log10 error", {se});
  }
  return out;
}

namespace {

struct CheckContext {
  const ExperimentConfig& config;
  CheckReport& report;

  bool corrupted(const std::string& name) const { return config.corrupt_partial == name; }

  void add(const std::string& name, Scalar value, Scalar threshold, bool passed,
           std::string note = {}) {
    report.items.push_back({name, value, threshold, passed, std::move(note)});
  }
  void add_error_gate(const std::string& name, Scalar value, Scalar threshold) {
    add(name, value, threshold, value <= threshold);
  }
};

}  // namespace

CheckReport run_check(const ExperimentConfig& config) {
  CheckReport report;
  CheckContext ctx{config, report};

  static const std::vector<std::string> kPartialNames = {
      "d1_Ld",          "d2_Ld",         "d1_Ltilde",        "d2_Ltilde",
      "d3_Ltilde",      "jac1_phi",      "jac2_phi",         "jac3_phi",
      "d13_Ltilde",     "dLtildeM_dtheta", "dLtildeM_dthetadot", "dLtildeM_dxddot",
      "dF_dtheta",      "dF_dthetadot",  "dG_dtheta",        "dG_dxddot",
  };
  if (!config.corrupt_partial.empty() &&
      std::find(kPartialNames.begin(), kPartialNames.end(), config.corrupt_partial) ==
          kPartialNames.end()) {
    throw std::invalid_argument("corrupt_partial names no checked derivative: '" +
                                config.corrupt_partial + "'");
  }

  CartPoleParams params;
  try {
    params = config.params();
    ctx.add("parameters_valid", 0, 0, true);
  } catch (const std::invalid_argument& e) {
    ctx.add("parameters_valid", 1, 0, false, e.what());
    report.passed = false;
    report.config_error = true;
    report.summary = std::string("[FAIL] parameters_valid: ") + e.what() + '\n';
    return report;
  }

  const Scalar h = config.h > 0 ? config.h : 0.01;
  const CartPoleDiscrete sys = cartpole::cp_discrete_system(params, h);
  const VakonomicProblem2& prob = sys.problem;
  const SolverSettings& st = config.settings;

  std::mt19937 gen(20240817u);
  std::uniform_real_distribution<Scalar> pos(-1.0, 1.0);
  std::uniform_real_distribution<Scalar> small_step(-0.05, 0.05);
  auto random_point = [&] {
    ConfigPoint q(2);
    q << pos(gen), pos(gen);
    return q;
  };
  auto nearby = [&](const ConfigPoint& q) {
    ConfigPoint r(2);
    r << q(0) + small_step(gen), q(1) + small_step(gen);
    return r;
  };
  constexpr int kSamples = 100;
  constexpr Scalar kDerivTol = 1e-6;

  // Corruption hook: adds a fixed offset to the named analytic derivative so
  // the corresponding gate must fail.
  auto offset = [&](const std::string& name) { return ctx.corrupted(name) ? 1e-3 : 0.0; };

  // --- pair Lagrangian gradients -------------------------------------------
  {
    std::vector<std::vector<ConfigPoint>> samples;
    for (int i = 0; i < kSamples; ++i) {
      const ConfigPoint a = random_point();
      samples.push_back({a, nearby(a)});
    }
    SlottedScalarFn f{2, 2, [&](std::span<const ConfigPoint> pts) {
                        return cartpole::cp_discrete_lagrangian(params, h, pts[0], pts[1]);
                      }};
    for (int slot = 0; slot < 2; ++slot) {
      const std::string name = slot == 0 ? "d1_Ld" : "d2_Ld";
      auto analytic = [&, slot](std::span<const ConfigPoint> pts) -> Vector {
        Vector v = slot == 0 ? cartpole::cp_discrete_lagrangian_d1(params, h, pts[0], pts[1])
                             : cartpole::cp_discrete_lagrangian_d2(params, h, pts[0], pts[1]);
        v(0) += offset(name);
        return v;
      };
      ctx.add_error_gate(name, check_derivatives(analytic, f, slot, samples, st), kDerivTol);
    }
  }

  // --- reduced cost and constraint slot derivatives ------------------------
  {
    std::vector<std::vector<ConfigPoint>> samples;
    for (int i = 0; i < kSamples; ++i) {
      const ConfigPoint a = random_point();
      const ConfigPoint b = nearby(a);
      samples.push_back({a, b, nearby(b)});
    }
    SlottedScalarFn fl{3, 2, [&](std::span<const ConfigPoint> pts) {
                         return prob.lagrangian.eval(pts);
                       }};
    SlottedScalarFn fp{3, 2, [&](std::span<const ConfigPoint> pts) {
                         return prob.phi(pts[0], pts[1], pts[2])(0);
                       }};
    const std::array<VakonomicProblem2::GradFn, 3> dl = {prob.d1_lagrangian, prob.d2_lagrangian,
                                                         prob.d3_lagrangian};
    const std::array<VakonomicProblem2::JacFn, 3> jp = {prob.jac1_constraints,
                                                        prob.jac2_constraints,
                                                        prob.jac3_constraints};
    for (int slot = 0; slot < 3; ++slot) {
      const std::string lname = "d" + std::to_string(slot + 1) + "_Ltilde";
      auto analytic_l = [&, slot, lname](std::span<const ConfigPoint> pts) -> Vector {
        Vector v = dl[static_cast<std::size_t>(slot)](pts[0], pts[1], pts[2]);
        v(0) += offset(lname);
        return v;
      };
      ctx.add_error_gate(lname, check_derivatives(analytic_l, fl, slot, samples, st), kDerivTol);

      const std::string pname = "jac" + std::to_string(slot + 1) + "_phi";
      auto analytic_p = [&, slot, pname](std::span<const ConfigPoint> pts) -> Vector {
        Vector v = jp[static_cast<std::size_t>(slot)](pts[0], pts[1], pts[2]).row(0).transpose();
        v(0) += offset(pname);
        return v;
      };
      ctx.add_error_gate(pname, check_derivatives(analytic_p, fp, slot, samples, st), kDerivTol);
    }

    // Mixed first/third-slot second derivative of the reduced cost against a
    // finite difference of its analytic third-slot gradient.
    Scalar worst = 0;
    for (const auto& pts : samples) {
      const Matrix analytic = prob.d13_lagrangian(pts[0], pts[1], pts[2]);
      Matrix fd(2, 2);
      for (int i = 0; i < 2; ++i) {
        const Scalar delta = st.fd_step_first * (1 + std::abs(pts[0](i)));
        ConfigPoint up = pts[0], dn = pts[0];
        up(i) += delta;
        dn(i) -= delta;
        fd.row(i) = ((prob.d3_lagrangian(up, pts[1], pts[2]) -
                      prob.d3_lagrangian(dn, pts[1], pts[2])) /
                     (2 * delta))
                        .transpose();
      }
      Matrix corrupted = analytic;
      corrupted(0, 0) += offset("d13_Ltilde");
      const Scalar rel = (corrupted - fd).cwiseAbs().maxCoeff() /
                         (1 + analytic.cwiseAbs().maxCoeff());
      worst = std::max(worst, rel);
    }
    ctx.add_error_gate("d13_Ltilde", worst, kDerivTol);
  }

  // --- continuous model partials --------------------------------------------
  {
    std::uniform_real_distribution<Scalar> acc(-2.0, 2.0);
    auto fd1 = [&](const std::function<Scalar(Scalar)>& f, Scalar at) {
      const Scalar delta = st.fd_step_first * (1 + std::abs(at));
      return (f(at + delta) - f(at - delta)) / (2 * delta);
    };
    auto ltm = [&](Scalar th, Scalar td, Scalar xd) { return cartpole::cp_Ltilde_M(params, th, td, xd); };
    auto bracket = [&](Scalar th, Scalar td, Scalar xd) { return cartpole::cp_bracket(params, th, td, xd); };
    auto gfun = [&](Scalar th, Scalar xd) { return cartpole::cp_G(params, th, xd); };

    struct Item {
      std::string name;
      int axis;
      std::function<Scalar(Scalar, Scalar, Scalar)> analytic;
      std::function<Scalar(Scalar, Scalar, Scalar)> value;
    };
    const std::vector<Item> items = {
        {"dLtildeM_dtheta", 0,
         [&](Scalar a, Scalar b, Scalar c) { return cartpole::cp_Ltilde_M_dtheta(params, a, b, c); },
         ltm},
        {"dLtildeM_dthetadot", 1,
         [&](Scalar a, Scalar b, Scalar c) {
           return cartpole::cp_Ltilde_M_dthetadot(params, a, b, c);
         },
         ltm},
        {"dLtildeM_dxddot", 2,
         [&](Scalar a, Scalar b, Scalar c) { return cartpole::cp_Ltilde_M_dxddot(params, a, b, c); },
         ltm},
        {"dF_dtheta", 0,
         [&](Scalar a, Scalar b, Scalar c) { return cartpole::cp_bracket_dtheta(params, a, b, c); },
         bracket},
        {"dF_dthetadot", 1,
         [&](Scalar a, Scalar b, Scalar) { return cartpole::cp_bracket_dthetadot(params, a, b); },
         bracket},
        {"dG_dtheta", 0,
         [&](Scalar a, Scalar, Scalar c) { return cartpole::cp_G_dtheta(params, a, c); },
         [&](Scalar a, Scalar, Scalar c) { return gfun(a, c); }},
        {"dG_dxddot", 2,
         [&](Scalar a, Scalar, Scalar) { return cartpole::cp_G_dxddot(params, a); },
         [&](Scalar a, Scalar, Scalar c) { return gfun(a, c); }},
    };
    for (const Item& item : items) {
      Scalar worst = 0;
      for (int i = 0; i < kSamples; ++i) {
        const Scalar th = pos(gen), td = pos(gen), xd = acc(gen);
        const Scalar analytic = item.analytic(th, td, xd) + offset(item.name);
        std::function<Scalar(Scalar)> along;
        Scalar at = 0;
        if (item.axis == 0) {
          along = [&](Scalar v) { return item.value(v, td, xd); };
          at = th;
        } else if (item.axis == 1) {
          along = [&](Scalar v) { return item.value(th, v, xd); };
          at = td;
        } else {
          along = [&](Scalar v) { return item.value(th, td, v); };
          at = xd;
        }
        const Scalar rel = std::abs(analytic - fd1(along, at)) / (1 + std::abs(analytic));
        worst = std::max(worst, rel);
      }
      ctx.add_error_gate(item.name, worst, kDerivTol);
    }

    // Constraint identity: recovering the pendulum acceleration from the
    // constraint must satisfy it exactly.
    Scalar worst_con = 0;
    for (int i = 0; i < kSamples; ++i) {
      const Scalar th = pos(gen), xd = acc(gen);
      worst_con = std::max(worst_con, std::abs(xd * std::cos(th) + params.l * gfun(th, xd) -
                                               params.g * std::sin(th)));
    }
    ctx.add_error_gate("constraint_identity", worst_con, 1e-12);

    // Regularity: grid minimum of the regularity function equals M^2 > 0 and
    // the function matches the second xddot-derivative of the cost density.
    Scalar min_R = std::numeric_limits<Scalar>::infinity();
    constexpr int kGrid = 720;
    const Scalar pi_const = std::acos(Scalar(-1));
    for (int i = 0; i <= kGrid; ++i) {
      const Scalar th = -pi_const + 2 * pi_const * i / kGrid;
      min_R = std::min(min_R, cartpole::cp_R(params, th));
    }
    ctx.add_error_gate("regularity_min_equals_M2", std::abs(min_R - params.M * params.M), 1e-12);
    ctx.add("regularity_positive", min_R, 0, min_R > 0, "grid minimum of the regularity function");

    Scalar worst_R = 0;
    for (int i = 0; i < kSamples; ++i) {
      const Scalar th = pos(gen), td = pos(gen), xd = acc(gen);
      const Scalar delta = 1.22e-4 * (1 + std::abs(xd));  // eps^(1/4) relative step
      const Scalar second =
          (ltm(th, td, xd + delta) - 2 * ltm(th, td, xd) + ltm(th, td, xd - delta)) /
          (delta * delta);
      const Scalar rel = std::abs(cartpole::cp_R(params, th) - second) / (1 + std::abs(second));
      worst_R = std::max(worst_R, rel);
    }
    ctx.add_error_gate("regularity_matches_fd", worst_R, kDerivTol);
  }

  // --- discrete cross-checks -------------------------------------------------
  {
    Scalar worst_el = 0, worst_red = 0;
    for (int i = 0; i < kSamples; ++i) {
      const ConfigPoint a = random_point();
      const ConfigPoint b = nearby(a);
      const ConfigPoint c = nearby(b);
      const Vector el = discrete_euler_lagrange(sys.system, a, b, c, st);
      const Scalar el_th = el(sys.system.split.unactuated.front());
      const Scalar printed = cartpole::cp_discrete_phi(params, h, a, b, c);
      worst_el = std::max(worst_el, std::abs(printed - h * h * el_th) / (1 + std::abs(printed)));
      const Scalar reduced = prob.phi(a, b, c)(0);
      worst_red =
          std::max(worst_red, std::abs(reduced - printed / (h * h)) / (1 + std::abs(reduced)));
    }
    ctx.add_error_gate("phi_equals_h2_times_el", worst_el, 1e-10);
    ctx.add_error_gate("phi_reduction_consistency", worst_red, 1e-9);

    Scalar min_det = std::numeric_limits<Scalar>::infinity();
    for (int i = 0; i < kSamples; ++i) {
      const ConfigPoint a = random_point();
      const ConfigPoint b = nearby(a);
      const ConfigPoint c = nearby(b);
      const Vector lam = Vector::Constant(1, pos(gen));
      min_det = std::min(min_det, std::abs(kkt2(prob, a, b, c, lam, st).det));
    }
    ctx.add("kkt2_regular", min_det, st.singular_tol, min_det > st.singular_tol,
            "minimum |det| of the step Newton matrix over random bounded states");
  }

  report.passed = std::all_of(report.items.begin(), report.items.end(),
                              [](const CheckItem& item) { return item.passed; });
  std::ostringstream os;
  for (const CheckItem& item : report.items) {
    os << (item.passed ? "[PASS] " : "[FAIL] ") << item.name << " value=" << fmt(item.value)
       << " threshold=" << fmt(item.threshold);
    if (!item.note.empty()) os << " (" << item.note << ')';
    os << '\n';
  }
  os << (report.passed ? "all checks passed" : "some checks FAILED") << '\n';
  report.summary = os.str();
  return report;
}

}  // namespace vakon::experiments
