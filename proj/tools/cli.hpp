#pragma once

#include <string>
#include <vector>

namespace rffpsr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs the command line `args` (args[0] is the program name) and returns the exit code.
int run(const std::vector<std::string>& args);

/// Parses "1..10", "3" or "1,2,5" into sorted unique horizons.
std::vector<int> parse_horizons(const std::string& text);

}  // namespace rffpsr::cli
