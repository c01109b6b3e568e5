#include <iostream>

#include "ragkit/cli.hpp"

int main(int argc, char** argv) { return ragkit::cli::run_cli(argc, argv, std::cout, std::cerr); }
