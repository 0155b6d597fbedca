#include "gammacontam/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return gammacontam::run_cli(argc, argv, std::cout, std::cerr); }
