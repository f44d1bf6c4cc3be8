#include <iostream>

#include "ncl/cli.hpp"

int main(int argc, char** argv) { return ncl::run_cli(argc, argv, std::cout, std::cerr); }
