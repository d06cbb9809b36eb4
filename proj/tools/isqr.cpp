#include <iostream>

#include "isqr/cli.hpp"

int main(int argc, char** argv) {
  return isqr::cli::run_cli(argc, argv, std::cout, std::cerr);
}
