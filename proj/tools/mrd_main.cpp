#include <iostream>

#include "mrd/cli.hpp"

int main(int argc, char** argv) { return mrd::run_cli(argc, argv, std::cout, std::cerr); }
