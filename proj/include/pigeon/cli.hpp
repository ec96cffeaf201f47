#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pigeon::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Runs one subcommand. `args` excludes the program name. Results go to `out` (or to --out),
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pigeon::cli
