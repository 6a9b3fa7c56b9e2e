// flowmap: builds the linear map relating trajectories of two
// Hamiltonian-like systems and certifies it by independent integration.

#include "flowmap/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"flowmap: transition maps between split Hamiltonian-like systems"};
  app.require_subcommand(1);

  std::string run_config, verify_config;
  CLI::App* run = app.add_subcommand("run", "solve a config and write trajectories");
  run->add_option("config", run_config, "path to a JSON run config")->required();
  CLI::App* verify = app.add_subcommand(
      "verify", "solve at h and h/2 and check the convergence order");
  verify->add_option("config", verify_config, "path to a JSON run config")->required();
  CLI::App* list = app.add_subcommand("list", "list registered scenarios");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return flowmap::cli::cmd_run(run_config, std::cout, std::cerr);
  if (verify->parsed()) return flowmap::cli::cmd_verify(verify_config, std::cout, std::cerr);
  if (list->parsed()) return flowmap::cli::cmd_list(std::cout);
  return flowmap::cli::kExitConfigError;
}
