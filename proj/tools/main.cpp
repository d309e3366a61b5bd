#include "asphere/cli.hpp"

int main(int argc, char** argv) { return asphere::cli_main(argc, argv); }
