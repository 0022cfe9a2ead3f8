#pragma once

#include <iosfwd>

namespace ctxmotion {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,  // bad flags, schema or version errors
  kExitResource = 2,    // missing or unreadable files
  kExitNumeric = 3,     // NaN/Inf during training or inference
};

/// Subcommands: train, eval, predict, gen-synthetic, inspect-interactions.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ctxmotion
