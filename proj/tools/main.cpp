#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "sdmlmc/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-grid multi-level Monte Carlo experiments for the coupled "
               "porous-medium / free-flow model with a random conductivity"};
  app.require_subcommand(1);

  std::string config_path, outdir = ".";
  std::vector<std::string> overrides;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "flat key = value configuration file");
    sub->add_option("-D,--define", overrides, "override a configuration key (key=value)")
        ->take_all();
    sub->add_option("-o,--out", outdir, "output directory (default: current)");
  };

  add_common(app.add_subcommand("run", "estimate with slmc, mlmc or mgmlmc"));
  add_common(app.add_subcommand("compare", "run all three estimators on one budget"));
  add_common(app.add_subcommand("calibrate-beta", "variance-decay exponent sweep"));
  add_common(app.add_subcommand("calibrate-gamma", "cost-growth exponent measurement"));
  add_common(app.add_subcommand("dump-field", "write one conductivity realization"));
  add_common(app.add_subcommand("dump-mesh", "write one mesh level"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  return sdmlmc::cli::dispatch(command, config_path, overrides, outdir, std::cerr);
}
