#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mbdoa::cli {

/// Parses `args` (without the program name), dispatches to a subcommand and
/// maps errors to exit codes: 0 ok, 2 usage/config, 3 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mbdoa::cli
