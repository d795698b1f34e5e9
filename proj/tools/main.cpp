#include <iostream>

#include "eltrack/cli.hpp"

int main(int argc, char** argv) { return eltrack::run_cli(argc, argv, std::cout, std::cerr); }
