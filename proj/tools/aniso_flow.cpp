#include <iostream>

#include "aniso/cli.hpp"

int main(int argc, char** argv) { return aniso::run_cli(argc, argv, std::cout, std::cerr); }
