#include <iostream>
#include <string>
#include <vector>

#include "gola/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return gola::cli::run(args, std::cout, std::cerr);
}
