#include "cflab/cli.hpp"

int main(int argc, char** argv) { return cflab::cli_main(argc, argv); }
