#include <iostream>

#include "mmexit/cli.hpp"

int main(int argc, char** argv) { return mmexit::run_cli(argc, argv, std::cout, std::cerr); }
