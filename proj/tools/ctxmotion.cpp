#include <iostream>

#include "ctxmotion/cli.hpp"

int main(int argc, char** argv) { return ctxmotion::run_cli(argc, argv, std::cout, std::cerr); }
