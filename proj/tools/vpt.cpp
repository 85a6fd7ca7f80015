#include <iostream>

#include "vpt/cli.hpp"

int main(int argc, char** argv) { return vpt::cli_main(argc, argv, std::cout, std::cerr); }
