#include "volrob/cli.hpp"

int main(int argc, char** argv) { return volrob::cli_main(argc, argv); }
