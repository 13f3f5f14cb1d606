#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "wynn/cli.hpp"

namespace {

void add_overrides(CLI::App* cmd, wynn::cli::Overrides& o) {
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--n-max", o.n_max, "total number of observations");
  cmd->add_option("--replicates", o.replicates, "Monte Carlo replicates");
  cmd->add_option("--workers", o.workers, "worker threads (0: all cores)");
  cmd->add_option("--out", o.prefix, "output path prefix");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace wynn::cli;
  CLI::App app{"Adaptive Wynn designs for nonlinear regression"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides over;

  auto* sim = app.add_subcommand("simulate", "run the adaptive design and write the trajectory");
  auto* ora = app.add_subcommand("oracle", "compute the locally D-optimal design");
  auto* mc = app.add_subcommand("mc", "Monte Carlo consistency and normality study");
  auto* ses = app.add_subcommand("session", "interactive SUGGEST/OBSERVE loop on stdin/stdout");
  auto* chk = app.add_subcommand("check-config", "validate a configuration and print it with defaults filled in");
  for (auto* cmd : {sim, ora, mc, ses, chk}) {
    cmd->add_option("config", config_path, "JSON run configuration")->required();
    add_overrides(cmd, over);
  }

  auto* dia = app.add_subcommand("diagnose", "design-mass diagnostics of a saved trajectory");
  std::string traj_path;
  DiagnoseOptions dopt;
  dia->add_option("trajectory", traj_path, "trajectory JSON file")->required();
  dia->add_option("--d", dopt.d, "window diameter (default: calibrated)");
  dia->add_option("--cell-diameter", dopt.cell_diameter, "cluster cell diameter (default: d/3)");
  dia->add_option("--eps", dopt.epsilon, "mass slack epsilon");
  dia->add_option("--out", dopt.out, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  if (dia->parsed()) return cmd_diagnose(traj_path, dopt);

  wynn::RunConfig cfg;
  try {
    cfg = load_config(config_path);
    apply(cfg, over);
  } catch (const wynn::ConfigError& e) {
    std::cerr << "error: " << config_path << ": " << e.what() << '\n';
    return kUsage;
  }
  if (chk->parsed()) {
    std::cout << wynn::serialize_config(cfg);
    return kOk;
  }
  if (sim->parsed()) return cmd_simulate(cfg);
  if (ora->parsed()) return cmd_oracle(cfg);
  if (mc->parsed()) return cmd_mc(cfg);
  std::ios::sync_with_stdio(false);
  return cmd_session(cfg, std::cin, std::cout);
}
