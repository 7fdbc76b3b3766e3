#include "ibn/cli.hpp"

int main(int argc, char** argv) { return ibn::run_ibn_cli(argc, argv); }
