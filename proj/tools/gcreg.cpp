#include <string>
#include <vector>

#include "gcreg/cli.hpp"

int main(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return gcreg::cli::run_main(args);
}
