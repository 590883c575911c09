#include "mscl/cli.hpp"

int main(int argc, char** argv) { return mscl::cli::run(argc, argv); }
