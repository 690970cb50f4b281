#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace aerialmpt {

/// Entry point of the command-line tool. args[0] is the program name.
/// Returns the process exit code; failures print one "error: ..." line to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aerialmpt
