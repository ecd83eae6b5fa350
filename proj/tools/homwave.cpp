#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>

#include "runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Homogenized wave experiments: one JSON config per run"};
  std::string config, out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  app.add_option("--config", config, "experiment config (JSON)")->required();
  app.add_option("--out", out, "output directory (overrides the config)");
  app.add_option("--seed", seed, "random seed (overrides the config)");
  app.add_option("--threads", threads, "OpenMP threads (0 keeps the default)")->check(CLI::NonNegativeNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : homwave::cli::config_error;
  }
  return homwave::cli::run_file(config, out, seed, threads, std::cerr);
}
