#include <string>
#include <vector>

#include "recon/cli.hpp"

int main(int argc, char** argv) {
  return recon::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
