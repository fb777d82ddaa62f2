#include "formsim/cli.hpp"

int main(int argc, char** argv) { return formsim::cli_main(argc, argv); }
