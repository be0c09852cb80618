// Thin process wrapper around the CLI runner.

#include <iostream>
#include <string>
#include <vector>

#include "cbsim/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cbsim::run_cli(args, std::cout, std::cerr);
}
