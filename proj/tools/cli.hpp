#pragma once

namespace sage::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitUnconverged = 3;
inline constexpr int kExitNumeric = 4;

/// Entry point of the `sage` command; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace sage::cli
