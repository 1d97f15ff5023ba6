#include "cltrack/cli.hpp"

int main(int argc, char** argv) { return cltrack::run_cli(argc, argv); }
