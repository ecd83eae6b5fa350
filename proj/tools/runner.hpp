#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace homwave::cli {

enum ExitCode { ok = 0, config_error = 2, numerical_failure = 3 };

struct RunRequest {
  /// JSON text of one experiment; `config_path` only names it in messages.
  std::string config_text;
  std::string config_path = "<config>";
  /// Overrides the config's "out" when non-empty.
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

/// Runs one experiment and writes its artifacts plus manifest.json into the
/// output directory. Diagnostics go to `err`.
int run(const RunRequest& request, std::ostream& err);

/// Reads a file and runs it.
int run_file(const std::string& path, const std::string& out, std::optional<std::uint64_t> seed, int threads,
             std::ostream& err);

}  // namespace homwave::cli
