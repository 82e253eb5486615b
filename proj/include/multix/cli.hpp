#pragma once

#include <iosfwd>
#include <string_view>

namespace multix {

inline constexpr std::string_view kVersion = "0.1.0";

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitMalformedInput = 2,
  kExitFitFailure = 3,
  kExitInvalidFlags = 4,
};

/// Entry point of `multix fit|synth|bench`; regular output goes to `out`,
/// diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace multix
