// opprecond: condition-number ladders for the opposite-order preconditioners.

#include "opprecond/bench.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Preconditioner benchmark runner"};
  app.require_subcommand(1);
  app.footer(opprecond::config_help());

  auto* run = app.add_subcommand("run", "run a refinement ladder from a config file");
  std::string config_path;
  run->add_option("--config", config_path, "config file (key = value, [section] headers)")->required();

  // flags mirror config keys and override the file
  struct Flag {
    const char* name;
    const char* key;
    const char* help;
    std::string value;
  };
  std::vector<Flag> flags{
      {"--geometry", "geometry", "interval|polygon|ellipse|unit-square|cube-surface", {}},
      {"--levels", "levels", "number of meshes", {}},
      {"--space", "space", "dg0|dg2|cg1|cg3 (dgK, cgK)", {}},
      {"--backend", "backend", "sl-curve|order2|identity", {}},
      {"--s", "s", "Sobolev index (must match the backend)", {}},
      {"--alpha", "alpha", "hypersingular stabilization", {}},
      {"--beta", "beta", "X or X,X,... sweep", {}},
      {"--precond", "precond", "new|jacobi|opp|ssc, comma separated", {}},
      {"--refine", "refine", "uniform|corner-local", {}},
      {"--out", "out", "CSV output path", {}},
      {"--seed", "seed", "Lanczos seed", {}},
      {"--table", "table", "text table output path", {}},
  };
  for (auto& f : flags) run->add_option(f.name, f.value, f.help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    opprecond::RawConfig overrides;
    for (const auto& f : flags)
      if (!f.value.empty()) overrides[f.key] = opprecond::RawEntry{f.value, 0};
    const auto cfg = opprecond::parse_config(config_path, overrides);
    return opprecond::run_and_report(cfg, std::cout, std::cerr);
  } catch (const opprecond::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
