#include "cli.hpp"

int main(int argc, char** argv) { return hint::cli_run(argc, argv); }
