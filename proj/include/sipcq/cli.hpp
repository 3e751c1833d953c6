#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sipcq {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitInfeasible = 3,
  kExitSolverLimit = 4,
  kExitLpFailure = 5,
};

/// Command-line entry point; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sipcq
