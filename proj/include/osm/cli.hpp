#pragma once

#include <string>
#include <vector>

namespace osm {

// Entry point for the command-line tool. `args` is argv without the program
// name. Returns the process exit code: 0 success, 2 configuration error,
// 3 data error, 4 numerical failure, 1 anything else.
int run_cli(std::vector<std::string> args);

}  // namespace osm
