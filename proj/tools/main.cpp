#include <iostream>

#include "pipeline.hpp"

int main(int argc, char** argv) { return proxdebias::cli::run(argc, argv, std::cout, std::cerr); }
