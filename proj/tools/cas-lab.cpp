#include "caslab/cli.hpp"

int main(int argc, char** argv) { return caslab::cli::run(argc, argv); }
