#include <iostream>

#include "pqc/cli.hpp"

int main(int argc, char** argv) {
    return pqc::cli::run(argc, argv, std::cout, std::cerr);
}
