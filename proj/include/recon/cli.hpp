#pragma once

#include <string>
#include <vector>

namespace recon::cli {

// Full command-line entry point; args exclude the program name.
// Exit codes: 0 success, 1 runtime/data error, 2 usage error.
int run(std::vector<std::string> args);

}  // namespace recon::cli
