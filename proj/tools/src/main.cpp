#include <iostream>

#include "efcn_cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return efcn::cli::run(args, std::cout, std::cerr);
}
