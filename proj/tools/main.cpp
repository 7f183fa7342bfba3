#include <iostream>

#include "adaptkit/cli.hpp"

int main(int argc, char** argv) { return adaptkit::cli::run(argc, argv, std::cout, std::cerr); }
