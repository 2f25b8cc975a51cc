#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace relialloc::cli {

// Stable process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kBadInput = 2,
  kInfeasible = 3,
  kSearchLimit = 4,
  kOutputError = 5,
  kInternal = 6,
};

// Runs one invocation. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace relialloc::cli
