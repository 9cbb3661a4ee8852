#include <iostream>

#include "cbfcomp_cli/commands.hpp"

int main(int argc, char** argv)
{
    return cbfcomp::cli::run(argc, argv, std::cout, std::cerr);
}
