#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dasf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitPartial = 4;

inline constexpr unsigned long long kDefaultSeed = 42;

// Runs the command line `args` (without the program name). Everything the
// command prints goes to `out` / `err`; the return value is the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dasf::cli
