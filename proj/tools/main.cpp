#include <iostream>

#include "knnloo/cli.hpp"

int main(int argc, char** argv) {
  return knnloo::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
