#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "conelab/commands.hpp"
#include "conelab/config.hpp"
#include "conelab/errors.hpp"

int main(int argc, char** argv) {
  using namespace conelab;
  CLI::App app{"Tangent-cone regularity checks and elliptic solves on semialgebraic domains"};
  app.require_subcommand(1, 1);

  CommandRequest req;
  std::vector<std::string> points;
  std::string out_dir;
  std::uint64_t seed = 0;

  for (const auto& name : command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", req.config_path, "run configuration file")->required();
    sub->add_option("--point", points, "evaluation point \"x,y,z\" (repeatable)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "master seed, overrides the config");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  req.command = app.get_subcommands().front()->get_name();
  const auto* sub = app.get_subcommands().front();
  try {
    for (const auto& p : points) req.points.push_back(parse_point(p));
  } catch (const ValidationError& e) {
    std::cerr << "error: --point: " << e.what() << "\n";
    return kExitValidation;
  }
  if (sub->count("--out")) req.out_dir = out_dir;
  if (sub->count("--seed")) req.seed = seed;
  return run_cli(req, std::cout, std::cerr);
}
