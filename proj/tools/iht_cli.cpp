#include <iostream>

#include "iht/cli.hpp"

int main(int argc, char** argv) { return iht::run_cli(argc, argv, std::cout, std::cerr); }
