#include "sdlab/commands.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return sdlab::cli::run(argc, argv, std::cout, std::cerr);
}
