#pragma once

#include <iosfwd>

namespace ordinal_itr {

/// Process exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitNumerical = 3, kExitIo = 4 };

/// Parses arguments, runs one subcommand and returns its exit code.
int run_cli(int argc, const char * const * argv, std::ostream & out, std::ostream & err);

}  // namespace ordinal_itr
