#include <iostream>

#include "koopnet/cli.hpp"

int main(int argc, char** argv) { return koopnet::cli::run_cli(argc, argv, std::cout, std::cerr); }
