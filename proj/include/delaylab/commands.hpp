#pragma once

// Command-line front end. Exit codes: 0 success, 1 verification or agreement
// failure (or a run that left the numeric range), 2 usage or configuration
// error.

#include <iosfwd>
#include <string>
#include <vector>

namespace delaylab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

/// Shortest decimal that reads back to the same double.
std::string format_double(double x);

}  // namespace delaylab
