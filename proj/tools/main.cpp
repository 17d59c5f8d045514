#include "cli.hpp"

int main(int argc, char** argv) { return sage::cli::run_cli(argc, argv); }
