#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace meshot {

enum ExitCode : int { ExitConverged = 0, ExitUsage = 1, ExitNotConverged = 2 };

/// Runs one subcommand; `args` excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
             std::ostream& err = std::cerr);

int dispatch(int argc, const char* const* argv);

} // namespace meshot
