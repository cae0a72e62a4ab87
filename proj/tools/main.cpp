#include <iostream>

#include "trajinspect/cli.hpp"

int main(int argc, char** argv) { return trajinspect::run_cli(argc, argv, std::cout, std::cerr); }
