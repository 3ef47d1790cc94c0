#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace specmp::cli {

enum ExitCode : int { kSuccess = 0, kIoFailure = 1, kValidation = 2, kNumerical = 3 };

/// Runs the command line `args` (without the program name). Artifacts go to
/// files named by --out; `out` receives short summaries and `err` error
/// messages.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace specmp::cli
