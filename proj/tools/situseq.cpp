#include "situseq/cli.hpp"

int main(int argc, char** argv) { return situseq::run_cli(argc, argv); }
