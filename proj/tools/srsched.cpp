#include <iostream>

#include "srsched/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return srsched::run_cli(args, std::cout, std::cerr);
}
