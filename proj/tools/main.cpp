#include "cida/cli.hpp"

int main(int argc, char** argv) { return cida::cli_main(argc, argv); }
