#include <iostream>

#include "wbrag/cli.hpp"

int main(int argc, char** argv) {
    return wbrag::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
