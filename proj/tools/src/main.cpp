#include <iostream>

#include "h2sim/cli.hpp"

int main(int argc, char** argv) { return h2sim::run_cli(argc, argv, std::cout, std::cerr); }
