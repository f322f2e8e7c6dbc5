#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hetens::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitCompute = 4;

/// Runs the command line `args` (without the program name). Normal output
/// goes to `out`, diagnostics and progress to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hetens::cli
