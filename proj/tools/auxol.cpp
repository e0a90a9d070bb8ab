#include "auxol/cli.hpp"

int main(int argc, char** argv) { return auxol::run_cli(argc, argv); }
