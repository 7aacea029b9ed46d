#pragma once

#include <iosfwd>

namespace dlfd::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDataError = 2;
inline constexpr int kDivergence = 3;

/// Runs the command line in-process. Tables go to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dlfd::cli
