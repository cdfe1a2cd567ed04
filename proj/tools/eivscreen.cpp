#include <iostream>

#include "eivscreen/cli.hpp"

int main(int argc, char** argv) {
    return eivscreen::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
