#include "zonescan/cli.hpp"

int main(int argc, char** argv) { return zonescan::run_cli(argc, argv); }
