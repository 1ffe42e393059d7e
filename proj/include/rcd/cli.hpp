#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rcd {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitVerification = 3 };

/// Runs the command line `args` (program name excluded), writing the normal
/// report to `out` and diagnostics to `err`. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rcd
