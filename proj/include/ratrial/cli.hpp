#pragma once

#include <string>
#include <vector>

namespace ratrial {

/// Command-line entry point (testable in-process). Returns the process
/// exit code: 0 ok, 2 config error, 3 infeasible problem, 4 numeric failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace ratrial
