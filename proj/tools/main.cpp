#include "cli.hpp"

int main(int argc, char** argv) { return semsplat::cli::run(argc, argv); }
