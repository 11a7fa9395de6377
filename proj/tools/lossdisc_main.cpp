#include "lossdisc/cli.hpp"

int main(int argc, char** argv) { return lossdisc::cli::run(argc, argv); }
