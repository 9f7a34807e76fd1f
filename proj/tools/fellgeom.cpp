#include "fellgeom/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return fellgeom::cli::run(argc, argv, std::cout, std::cerr); }
