#include <iostream>
#include <string>
#include <vector>

#include "peqa/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return peqa::cli::Dispatch(args, std::cout, std::cerr);
}
