#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kgsq {

/// Exit codes: 0 success, 1 environment or stage failure, 2 a name that does
/// not resolve against the model.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUnresolved = 2 };

/// Entry point for the `kgsq` command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kgsq
