#include <iostream>
#include <string>
#include <vector>

#include "ptplan/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ptplan::cli::dispatch(args, std::cout, std::cerr);
}
