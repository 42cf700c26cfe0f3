#include "cfuse/cli.hpp"

int main(int argc, char** argv)
{
    return cfuse::run_cli(argc, argv);
}
