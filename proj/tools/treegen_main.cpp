#include "ibn/cli.hpp"

int main(int argc, char** argv) { return ibn::run_treegen_cli(argc, argv); }
