#include <iostream>

#include "himes/cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return himes::cli::run_cli(args, std::cout, std::cerr);
}
