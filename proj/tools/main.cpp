#include <exception>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "vakon/errors.hpp"
#include "vakon/experiments.hpp"

namespace {

namespace exp = vakon::experiments;

constexpr int kExitSuccess = 0;
constexpr int kExitBadConfig = 1;
constexpr int kExitSolverFailure = 2;

struct ModeArgs {
  CLI::App* cmd = nullptr;
  std::string config_file;
  std::map<std::string, std::string> values;       // raw flag values per config key
  std::map<std::string, CLI::Option*> options;
};

ModeArgs* setup_mode(CLI::App& app, const std::string& name, const std::string& description,
                     std::vector<std::unique_ptr<ModeArgs>>& storage) {
  storage.push_back(std::make_unique<ModeArgs>());
  ModeArgs& mode = *storage.back();
  mode.cmd = app.add_subcommand(name, description);
  // The step-size key needs the --h flag, so help gets no short form.
  mode.cmd->set_help_flag("--help", "print this help message and exit");
  mode.cmd->add_option("--config", mode.config_file, "key=value settings file ('#' comments)");
  for (const std::string& key : exp::config_keys()) {
    std::string& slot = mode.values[key];  // map nodes are stable
    mode.options[key] = mode.cmd
                            ->add_option("--" + key, slot, "config key " + key)
                            ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
  return &mode;
}

exp::ExperimentConfig config_for(const ModeArgs& mode) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const std::string& key : exp::config_keys()) {
    const auto option = mode.options.at(key);
    if (option->count() > 0) overrides.emplace_back(key, mode.values.at(key));
  }
  return exp::load_config(mode.config_file, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Variational integrator and trajectory optimizer for underactuated systems,\n"
      "with the cart-pole as the built-in benchmark."};
  app.set_help_flag("--help", "print this help message and exit");
  app.require_subcommand(1);

  std::vector<std::unique_ptr<ModeArgs>> storage;
  ModeArgs* flow = setup_mode(app, "flow", "advance the discrete flow from a seed", storage);
  ModeArgs* bvp = setup_mode(app, "bvp", "single-shooting boundary value solve", storage);
  ModeArgs* oracle =
      setup_mode(app, "oracle", "direct transcription solve of the boundary problem", storage);
  ModeArgs* energy =
      setup_mode(app, "energy", "flow run with reconstructed-energy diagnostics", storage);
  ModeArgs* convergence =
      setup_mode(app, "convergence", "step-size refinement study against an integrated reference",
                 storage);
  ModeArgs* check =
      setup_mode(app, "check", "derivative gates, identities and regularity diagnostics", storage);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadConfig;
  }

  try {
    if (flow->cmd->parsed()) {
      const exp::FlowRunResult result = exp::run_flow(config_for(*flow));
      std::cout << result.summary;
      return kExitSuccess;
    }
    if (bvp->cmd->parsed()) {
      const exp::BvpRunResult result = exp::run_bvp(config_for(*bvp));
      std::cout << result.summary;
      if (!result.converged) {
        std::cerr << "solver failure: shooting did not converge (residual="
                  << result.stats.residual << ")\n";
        return kExitSolverFailure;
      }
      return kExitSuccess;
    }
    if (oracle->cmd->parsed()) {
      const exp::OracleRunResult result = exp::run_oracle(config_for(*oracle));
      std::cout << result.summary;
      return kExitSuccess;
    }
    if (energy->cmd->parsed()) {
      const exp::EnergyRunResult result = exp::run_energy_study(config_for(*energy));
      std::cout << result.summary;
      return kExitSuccess;
    }
    if (convergence->cmd->parsed()) {
      const exp::ConvergenceRunResult result = exp::run_convergence(config_for(*convergence));
      std::cout << result.summary;
      return kExitSuccess;
    }
    if (check->cmd->parsed()) {
      const exp::CheckReport report = exp::run_check(config_for(*check));
      std::cout << report.summary;
      if (report.passed) return kExitSuccess;
      return report.config_error ? kExitBadConfig : kExitSolverFailure;
    }
    std::cerr << "no subcommand selected\n";
    return kExitBadConfig;
  } catch (const vakon::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolverFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "bad config: " << e.what() << '\n';
    return kExitBadConfig;
  } catch (const std::out_of_range& e) {
    std::cerr << "bad config: " << e.what() << '\n';
    return kExitBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolverFailure;
  }
}
