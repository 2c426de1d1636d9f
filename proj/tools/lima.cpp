#include "lima/cli.hpp"

int main(int argc, char** argv) { return lima::cli::run(argc, argv); }
