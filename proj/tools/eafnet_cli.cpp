#include "eafnet/cli.hpp"

int main(int argc, char** argv) { return eafnet::cli::run_cli(argc, argv); }
