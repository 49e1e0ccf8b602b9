#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ilr {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2 };

/// Entry point for the `ilr` tool. `args` excludes the program name.
/// Subcommands: gen-data, train, score, eval.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ilr
