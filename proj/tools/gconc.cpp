#include "gconc/cli.hpp"

int main(int argc, char** argv) { return gconc::run_cli(argc, argv); }
