#pragma once

namespace stabreg {

// Exit codes: 0 success, 2 input or validation error, 3 numerical failure,
// 4 benchmark finished with flagged methods.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitPartial = 4;

// Entry point for the `stabreg` tool. Subcommands: fit, simulate, benchmark,
// stabsel, report. Verbosity comes from the STABREG_LOG environment variable
// (trace, debug, info, warn, error, off; default warn).
int run_cli(int argc, const char* const* argv);

}  // namespace stabreg
