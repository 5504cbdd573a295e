#include <iostream>

#include "pgp/cli.hpp"

int main(int argc, char** argv) {
  pgp::tune_allocator();
  return pgp::run_cli(argc, argv, std::cout, std::cerr);
}
