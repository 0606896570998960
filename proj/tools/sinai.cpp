#include "sinai/cli.hpp"

int main(int argc, char** argv)
{
    return sinai::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
