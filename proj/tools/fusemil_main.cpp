#include "fusemil/cli.hpp"

int main(int argc, char** argv) { return fusemil::cli::run(argc, argv); }
