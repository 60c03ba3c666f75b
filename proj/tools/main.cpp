#include "distlift/cli.hpp"

int main(int argc, char** argv) { return distlift::cli::cli_main(argc, argv); }
