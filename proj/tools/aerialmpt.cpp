#include <iostream>
#include <string>
#include <vector>

#include "aerialmpt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return aerialmpt::run_cli(args, std::cout, std::cerr);
}
