#include "cli.hpp"

int main(int argc, char** argv) { return syncog::cli::run_cli(argc, argv); }
