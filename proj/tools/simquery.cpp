#include <iostream>
#include <string>
#include <vector>

#include "simquery/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return simquery::cli::dispatch(args, std::cout, std::cerr);
}
