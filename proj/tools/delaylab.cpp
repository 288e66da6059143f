#include <iostream>
#include <string>
#include <vector>

#include "delaylab/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return delaylab::run_cli(args, std::cout, std::cerr);
}
