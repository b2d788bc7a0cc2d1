#include "rsgan/cli.hpp"

int main(int argc, char** argv) { return rsgan::cli_main(argc, argv); }
