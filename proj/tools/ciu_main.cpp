#include <iostream>
#include <string>
#include <vector>

#include "ciu/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ciu::cli::run(args, std::cout, std::cerr);
}
