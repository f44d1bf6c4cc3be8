#pragma once

#include <iosfwd>

namespace ncl {

/// Exit codes of the experiment runner.
enum ExitCode : int { kExitOk = 0, kExitConfigError = 1, kExitRuntimeError = 2 };

/// Entry point of the `ncl` tool; kept in the library so tests can drive it.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Identifier baked in at configure time (short git hash when available).
const char* build_id();

}  // namespace ncl
