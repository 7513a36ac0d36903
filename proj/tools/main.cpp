#include "cli.hpp"

int main(int argc, char** argv) { return qdcli::run_cli(argc, argv); }
