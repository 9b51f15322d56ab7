#include <iostream>

#include "fform/cli.hpp"

int main(int argc, char** argv) {
  return fform::cli::run(argc, argv, std::cout, std::cerr);
}
