#include "ordinal_itr/cli.hpp"

#include <iostream>

int main(int argc, char ** argv) { return ordinal_itr::run_cli(argc, argv, std::cout, std::cerr); }
