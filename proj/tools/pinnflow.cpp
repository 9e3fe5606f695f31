#include <iostream>

#include "pinnflow/cli.hpp"

int main(int argc, char** argv) { return pinnflow::run_cli(argc, argv, std::cout, std::cerr); }
