#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spiked {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitValidation = 2, kExitNumerical = 3 };

/// Entry point of spiked-detect. Usage problems and invalid input return 2,
/// numerical failures 3.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

/// Convenience overload for tests: args excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spiked
