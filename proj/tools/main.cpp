#include <iostream>

#include "cpfts/cli.hpp"

int main(int argc, char** argv) { return cpfts::cli_main(argc, argv, std::cout, std::cerr); }
