#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vakon/cartpole.hpp"
#include "vakon/newton.hpp"
#include "vakon/table_io.hpp"
#include "vakon/types.hpp"

namespace vakon::experiments {

/// One experiment's worth of settings. Populated from key=value config files
/// and per-key command-line flags (flags override files); every field below
/// maps to exactly one key.
struct ExperimentConfig {
  // cart-pole parameters (keys: M, m, l, g, hbar)
  Scalar M = 1.0, m = 0.3, l = 0.5, g = 9.8, hbar = 0.0;

  // discretization (keys: h, N)
  Scalar h = 0.01;
  int N = 200;

  // seed data for flow/energy runs: either explicit nodes/multipliers
  // (keys q0..q3 as "x,theta" pairs, lam0, lam1) or an eight-component
  // continuous state "x,theta,xdot,thetadot,p1theta,p1thetadot,pi,pidot"
  // (key state0) from which the seed is sampled.
  std::optional<ConfigPoint> q0, q1, q2, q3;
  std::optional<Scalar> lam0, lam1;
  std::optional<std::array<Scalar, 8>> state0;
  bool project_seed = false;  // key project_seed: project q2, q3 before flowing

  // boundary data for bvp/oracle runs (keys qNm1, qN, plus q0, q1 above;
  // q2, q3, lam0, lam1 act as the initial guess when present)
  std::optional<ConfigPoint> qNm1, qN;
  int homotopy = 0;  // key homotopy: boundary continuation steps for oracle

  // convergence study (keys h_list as comma-separated values, T)
  std::vector<Scalar> h_list;
  Scalar T = 1.0;

  // outputs (keys csv, svg); empty means "do not write"
  std::string csv, svg;

  // solver settings (keys newton_tol, max_iter, fd_step_first,
  // fd_step_second, singular_tol, backtrack_max)
  SolverSettings settings;

  // fault-injection hook for run_check (key corrupt_partial): name of a
  // hand-coded derivative to perturb so the gate must fail
  std::string corrupt_partial;

  cartpole::CartPoleParams params() const;  // validates the physical fields
};

/// Keys accepted by apply_setting, in a stable order (drives CLI flag
/// generation).
const std::vector<std::string>& config_keys();

/// Applies one key=value assignment; throws std::invalid_argument for
/// unknown keys or unparsable values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Parses a key=value file ('#' starts a comment, blank lines ignored) on
/// top of `base`.
ExperimentConfig parse_config_file(const std::string& path, ExperimentConfig base = {});

/// Layered load: defaults, then the VAKON_SETTINGS file if that environment
/// variable is set, then `file` if nonempty, then `overrides` in order.
ExperimentConfig load_config(const std::string& file,
                             const std::vector<std::pair<std::string, std::string>>& overrides);

struct FlowRunResult {
  TrajTable table;
  std::vector<ConfigPoint> points;
  std::vector<Vector> multipliers;
  Scalar max_res_stat = 0, max_res_con = 0;
  Scalar total_cost = 0;
  double runtime_seconds = 0;
  std::string summary;
};

/// Runs the discrete flow from the configured seed, writes the CSV/SVG
/// outputs when configured, and reports residual/cost/runtime statistics.
FlowRunResult run_flow(const ExperimentConfig& config);

struct BvpRunResult {
  TrajTable table;
  std::vector<ConfigPoint> points;
  std::vector<Vector> multipliers;
  bool converged = false;
  NewtonStats stats;
  Scalar endpoint_error = 0;
  std::string summary;
};

/// Single-shooting boundary solve between the configured endpoint pairs.
BvpRunResult run_bvp(const ExperimentConfig& config);

struct OracleRunResult {
  TrajTable table;
  std::vector<ConfigPoint> points;
  std::vector<Vector> multipliers;
  NewtonStats stats;
  Scalar max_residual = 0;
  std::string summary;
};

/// Direct transcription solve of the boundary problem, optionally through a
/// sequence of `homotopy` intermediate boundaries warm-started in turn.
OracleRunResult run_oracle(const ExperimentConfig& config);

struct EnergyRunResult {
  TrajTable table;
  std::vector<Scalar> H;  // reconstructed energy, aligned with first_k
  int first_k = 0;
  Scalar scale = 0;              // fitted multiplier-to-momentum scale s
  Scalar fit_residual = 0;       // rms misfit of s*lambda against the reference momentum
  Scalar early_amplitude = 0;    // max |H_k - H_first| over the first 50 samples
  Scalar max_deviation = 0;      // max |H_k - H_first| over all samples
  Scalar trend_slope = 0;        // linear trend of H over time
  bool bounded = false;          // band + trend acceptance of the series
  std::string summary;
};

/// Flow run plus reconstructed-energy diagnostics: velocities by central
/// differences, accelerations by second differences, momentum p1_theta as
/// s * lambda with s calibrated against a matched reconstruction of the
/// continuous momentum.
EnergyRunResult run_energy_study(const ExperimentConfig& config);

struct ConvergenceRow {
  Scalar h = 0;
  int N = 0;
  Scalar max_position_error = 0;
  Scalar pi_fit_residual = 0;  // rms deviation of the reconstructed pi from a line
};

struct ConvergenceRunResult {
  std::vector<ConvergenceRow> rows;
  std::vector<Scalar> position_orders;  // log2 error ratios between successive h
  std::vector<Scalar> pi_orders;
  std::string summary;
};

/// Flows the configured reference state at every h in h_list (each must
/// divide T) and compares against a fine RK4 reference at matching times.
ConvergenceRunResult run_convergence(const ExperimentConfig& config);

struct CheckItem {
  std::string name;
  Scalar value = 0;      // measured error / quantity
  Scalar threshold = 0;  // pass bound (value <= threshold passes)
  bool passed = false;
  std::string note;
};

struct CheckReport {
  std::vector<CheckItem> items;
  bool passed = false;
  bool config_error = false;  // failure caused by invalid parameters
  std::string summary;
};

/// Derivative gates for every hand-coded partial, the constraint identity,
/// regularity positivity, and the discrete constraint/Euler-Lagrange
/// cross-check, on deterministic pseudo-random samples.
CheckReport run_check(const ExperimentConfig& config);

}  // namespace vakon::experiments
