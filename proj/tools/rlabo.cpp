#include "rlabo/cli.hpp"

int main(int argc, char** argv) { return rlabo::cli::run_cli(argc, argv); }
