#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "warpflow/cli.hpp"

namespace wc = warpflow::cli;

int main(int argc, char** argv) {
  CLI::App app{"warpflow: warped-product curvature, functional identities and flows on periodic grids"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  int m = 0;
  int n = 0;

  auto* constants = app.add_subcommand("constants", "warping constants for both branches");
  constants->add_option("--m", m, "dimension of the base")->required();
  constants->add_option("--n", n, "dimension of the fibre")->required();
  constants->add_option("--out", out_path, "write CSV here instead of stdout");

  for (const char* name : {"verify-curvature", "verify-identity", "verify-variation", "flow"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "INI experiment file")->required();
    sub->add_option("--out", out_path, "write CSV here instead of stdout");
    sub->add_option("--seed", seed, "overrides [run] seed");
  }
  app.get_subcommand("verify-curvature")->description("closed-form curvature against the generic operators");
  app.get_subcommand("verify-identity")->description("total scalar curvature against the weighted functional");
  app.get_subcommand("verify-variation")->description("first variation against finite differences");
  app.get_subcommand("flow")->description("run a flow and report functional, dissipation and constraint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : wc::exit_invalid;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  wc::CommandResult result;
  try {
    if (command == "constants") {
      wc::ExperimentConfig config;
      config.m = m;
      config.n = n;
      result = wc::run_command(command, config);
    } else {
      result = wc::run_command(command, wc::load_config(config_path, command, seed));
    }
  } catch (const wc::ConfigError& e) {
    result = {wc::exit_invalid, "", e.what()};
  }

  if (!result.csv.empty()) {
    if (out_path.empty()) {
      std::cout << result.csv;
    } else {
      std::ofstream out(out_path, std::ios::binary);
      if (!out) {
        std::cerr << "error: cannot write '" << out_path << "'\n";
        return wc::exit_invalid;
      }
      out << result.csv;
    }
  }
  if (!result.message.empty())
    std::cerr << (result.exit_code == wc::exit_invalid ? "error: " : "") << result.message << '\n';
  return result.exit_code;
}
