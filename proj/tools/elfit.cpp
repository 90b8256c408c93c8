#include <iostream>
#include <string>
#include <vector>

#include "elfit/run.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return elfit::cli_main(args, std::cout, std::cerr);
}
