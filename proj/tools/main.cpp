#include <iostream>
#include <string>
#include <vector>

#include "conformal/cli.hpp"

int main(int argc, char** argv) {
  return conformal::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
