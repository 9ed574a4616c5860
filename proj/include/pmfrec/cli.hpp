#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pmfrec {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

/// Runs the command line (without the program name). Results that have no
/// --out path go to `out`; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pmfrec
