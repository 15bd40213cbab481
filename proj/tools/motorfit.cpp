#include <iostream>

#include "motorfit/cli.hpp"

int main(int argc, char** argv) { return motorfit::cli::run(argc, argv, std::cout, std::cerr); }
