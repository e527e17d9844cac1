#include <iostream>

#include "isomer/cli/commands.hpp"

int main(int argc, char** argv) { return isomer::cli::run_cli(argc, argv, std::cout, std::cerr); }
