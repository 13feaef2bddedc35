#include "council/cli.hpp"

int main(int argc, char** argv) { return council::cli::run_cli(argc, argv); }
