#include <iostream>

#include "tcqa/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return tcqa::run_cli(std::move(args), std::cout, std::cerr);
}
