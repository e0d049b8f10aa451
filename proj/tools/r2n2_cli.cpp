#include <iostream>

#include "r2n2/cli.hpp"

int main(int argc, char** argv) { return r2n2::cli::cli_main(argc, argv, std::cout, std::cerr); }
