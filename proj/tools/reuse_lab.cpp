#include "reuse/cli.h"

int main(int argc, char** argv) { return reuse::run_cli(argc, argv); }
