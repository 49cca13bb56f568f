#include "qbag/cli.hpp"

int main(int argc, char** argv) { return qbag::cli::run_main(argc, argv); }
