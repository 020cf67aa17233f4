#include "lightning/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return lightning::run_cli(argc, argv, std::cout, std::cerr);
}
