#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "toralmix/commands.hpp"

int main(int argc, char** argv) {
  using namespace toralmix;
  CLI::App app{"toralmix: mixing diagnostics for toral extensions of intermittent maps"};
  std::string command, config_path, out_dir, preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string names;
  for (const auto& n : command_names()) names += (names.empty() ? "" : ", ") + n;
  app.add_option("command", command, "one of: " + names)->required()->check(CLI::IsMember(command_names()));
  app.add_option("--config", config_path, "TOML experiment file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides output.dir)");
  app.add_option("--seed", seed, "master seed (overrides run.seed)");
  app.add_option("--threads", threads, "OpenMP threads, 0 for the runtime default")->check(CLI::NonNegativeNumber);
  app.add_option("--preset", preset, "named preset, applied before the config file's values")
      ->check(CLI::IsMember(preset_names()));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : exit_error;
  }
  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      cfg = load_config(config_path, preset);
    } else {
      cfg = parse_config_string("", preset);
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    return run_command(command, cfg, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_error;
  }
}
