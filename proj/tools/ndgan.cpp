#include "ndgan/cli.hpp"

int main(int argc, char** argv) { return ndgan::cli::main(argc, argv); }
