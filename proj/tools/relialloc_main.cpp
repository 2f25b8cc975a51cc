#include <iostream>
#include <string>
#include <vector>

#include "relialloc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return relialloc::cli::run(args, std::cout, std::cerr);
}
