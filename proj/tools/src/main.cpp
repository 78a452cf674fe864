#include <iostream>

#include "spiked/cli.hpp"

int main(int argc, char** argv) { return spiked::cli_main(argc, argv, std::cout, std::cerr); }
