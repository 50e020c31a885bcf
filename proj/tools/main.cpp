#include <iostream>

#include "bwsl/cli.hpp"

int main(int argc, char** argv) { return bwsl::run_cli(argc, argv, std::cout, std::cerr); }
