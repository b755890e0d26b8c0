#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace knnloo::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kParse = 3,
  kValidation = 4,
  kResource = 5,
};

/// Environment variable read for the default worker count.
inline constexpr const char* kThreadsEnv = "KNNLOO_THREADS";

/// Runs one command line (args[0] is the program name). Results go to `out`
/// unless --out names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace knnloo::cli
