#include <iostream>

#include "tapeq/cli.hpp"

int main(int argc, char** argv) { return tapeq::run_cli(argc, argv, std::cout, std::cerr); }
