#include "dmt/cli.hpp"

int main(int argc, char** argv) { return dmt::run_cli(argc, argv); }
