#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mtforge
{

/// Exit codes of the command-line front end.
enum ExitCode : int
{
  kExitOk = 0,
  kExitUsage = 1,
  kExitRuntime = 2,
};

/// Runs one `mtforge` invocation. args excludes the program name. Data goes to
/// `out` (or files), diagnostics and the resolved configuration to `err`.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace mtforge
