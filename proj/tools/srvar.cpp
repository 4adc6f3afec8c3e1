#include "srvar/cli.hpp"

int main(int argc, char** argv)
{
    return srvar::cli::run(argc, argv);
}
