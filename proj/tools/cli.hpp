#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "facecoder/errors.hpp"

namespace facecoder::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumerical = 3,
};

/// Exit code for a library error.
int exit_code_for(ErrorKind kind);

/// Runs the `facecoder` command line. args[0] is the program name. Messages go
/// to `out` and diagnostics to `err`; nothing calls std::exit.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace facecoder::cli
