#include "mave/cli.hpp"

int main(int argc, char** argv) { return mave::cli::run(argc, argv); }
