#include "tclust/cli.hpp"

int main(int argc, char **argv) { return tclust::run_cli(argc, argv); }
