#include <iostream>

#include "multix/cli.hpp"

int main(int argc, char** argv) { return multix::run_cli(argc, argv, std::cout, std::cerr); }
