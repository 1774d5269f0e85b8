#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace scd::cli {

/// Exit codes of the scd tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitInput = 2,
  kExitDegenerate = 3,
  kExitInsufficientData = 4,
};

/// Parses `args` (without the program name) and runs one subcommand. Reports
/// go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scd::cli
