#include "fastbkmr/cli.hpp"

int main(int argc, char** argv) { return fastbkmr::run_cli(argc, argv); }
