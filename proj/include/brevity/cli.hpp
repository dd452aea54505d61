#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace brevity {

enum ExitCode : int { exit_ok = 0, exit_other = 1, exit_usage = 2, exit_data = 3, exit_no_incumbent = 4 };

/// Entry point of the `brevity` command; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace brevity
