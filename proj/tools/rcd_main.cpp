#include <iostream>
#include <string>
#include <vector>

#include "rcd/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rcd::run_cli(args, std::cout, std::cerr);
}
