#include "tsfem/cli.hpp"

int main(int argc, char** argv) { return tsfem::run_cli(argc, argv); }
