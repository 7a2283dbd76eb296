#pragma once

#include <string>
#include <vector>

namespace mvgb::cli {

// Parses argv and dispatches to the requested subcommand. Returns the process
// exit status: 0 success, 1 usage error, 2 data error, 3 numeric failure.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace mvgb::cli
