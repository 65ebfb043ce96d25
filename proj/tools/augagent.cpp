#include <iostream>
#include <string>
#include <vector>

#include "augagent/cli.hpp"

int main(int argc, char** argv) {
  return augagent::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
