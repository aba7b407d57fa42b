#include "cli.hpp"

int main(int argc, char** argv) { return edgescout::cli::run(argc, argv); }
