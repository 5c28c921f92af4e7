#include <CLI11.hpp>
#include <iostream>

#include "relaxctrl/config.hpp"
#include "relaxctrl/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"relaxctrl: relaxed optimal control of semilinear parabolic PDEs"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::vector<int> levels;

  auto* solve = app.add_subcommand("solve", "run the relaxed solver");
  solve->add_option("--config", config_path, "JSON run configuration")->required();
  solve->add_option("--out", out_dir, "output directory (overrides config)");
  solve->add_option("--seed", seed, "seed (overrides config)")
      ->each([&](const std::string&) { seed_set = true; });

  auto* verify = app.add_subcommand("verify", "run the verification bundle");
  verify->add_option("--config", config_path, "JSON run configuration")->required();
  verify->add_option("--out", out_dir, "output directory (overrides config)");

  auto* chatter = app.add_subcommand(
      "chatter", "solve, then emit oscillating classical controls");
  chatter->add_option("--config", config_path, "JSON run configuration")->required();
  chatter->add_option("--out", out_dir, "output directory (overrides config)");
  chatter->add_option("--levels", levels, "refinement ladder (overrides config)")
      ->delimiter(',');

  auto* presets = app.add_subcommand("presets", "list registered presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets->parsed()) return relaxctrl::list_presets(std::cout);

    relaxctrl::RunConfig cfg = relaxctrl::parse_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed_set) {
      cfg.seed = seed;
      cfg.solver.seed = seed;
    }
    if (!levels.empty()) cfg.chatter_levels = levels;

    if (solve->parsed()) return relaxctrl::run_solve(cfg, std::cout);
    if (verify->parsed()) return relaxctrl::run_verify(cfg, std::cout);
    if (chatter->parsed()) return relaxctrl::run_chatter(cfg, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return relaxctrl::kExitError;
  }
  return relaxctrl::kExitError;
}
