#include "argent/cli.hpp"

int main(int argc, char** argv) { return argent::cli_main(argc, argv); }
