#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcl/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Parameter-server lab: median and sign aggregation under heterogeneous data"};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "Execute a single-run study");
  run->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  auto* sweep = app.add_subcommand("sweep", "Run one configuration over a grid of noise scales");
  sweep->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  auto* lab = app.add_subcommand("medianlab", "Study the law of the noisy median");
  lab->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  mcl::VerifyOptions verify_opts;
  auto* verify = app.add_subcommand("verify", "Run the acceptance suite");
  verify->add_flag("--json", verify_opts.json, "Machine-readable report");
  verify->add_option("--only", verify_opts.only, "Criterion ids to run")->delimiter(',');
  verify->add_flag("--corrupt-median", verify_opts.corrupt_median,
                   "Swap the coordinate mean in for the median (mutation check)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mcl::kExitConfig;
  }

  mcl::CommandContext ctx{std::cout, std::cerr, mcl::threads_from_env()};
  if (*run) return mcl::cmd_run(config, ctx);
  if (*sweep) return mcl::cmd_sweep(config, ctx);
  if (*lab) return mcl::cmd_medianlab(config, ctx);
  return mcl::cmd_verify(verify_opts, ctx);
}
