#include "fdia/cli.hpp"

int main(int argc, char** argv) { return fdia::cli::run_cli(argc, argv); }
