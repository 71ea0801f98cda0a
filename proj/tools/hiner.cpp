#include <iostream>
#include <string>
#include <vector>

#include "hiner/cli.hpp"

int main(int argc, char** argv) {
  return hiner::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
