#pragma once

#include <string>
#include <vector>

namespace fdia::cli {

// Exit codes: 0 success, 1 runtime failure, 2 input or usage error.
int run_cli(int argc, char** argv);

// Same as above with argv[0] omitted.
int run_cli(const std::vector<std::string>& args);

}  // namespace fdia::cli
