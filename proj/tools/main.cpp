#include "mixhmm/cli.hpp"

int main(int argc, char** argv) { return mixhmm::run_cli(argc, argv); }
