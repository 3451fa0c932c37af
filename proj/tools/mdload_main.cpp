#include <iostream>

#include "mdload/cli.hpp"

int main(int argc, char** argv) { return mdload::cli_main(argc, argv, std::cout, std::cerr); }
