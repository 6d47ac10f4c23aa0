#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fieldrate::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kInfeasible = 3,
  kBoundViolation = 4,
};

/// Runs one command. args excludes the program name. Results go to --out when
/// given, otherwise to out; diagnostics go to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fieldrate::cli
