#pragma once

#include <memory>

#include <spdlog/logger.h>

namespace sage {

/// Process-wide logger writing to standard error. Verbosity comes from the
/// SAGE_LOG environment variable (error, warn, info, debug); default warn.
spdlog::logger& log();

/// Re-reads SAGE_LOG. Called once by the CLI; tests may call it after setenv.
void configure_logging_from_env();

}  // namespace sage
