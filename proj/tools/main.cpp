#include <iostream>

#include "factdebate/cli.hpp"

int main(int argc, char** argv) { return factdebate::cli::run_cli(argc, argv, std::cout, std::cerr); }
