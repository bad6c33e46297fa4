#include <iostream>

#include "cdpo/cli/commands.hpp"

int main(int argc, char** argv) { return cdpo::cli::run_cli(argc, argv, std::cout, std::cerr); }
