#include "opekit/cli.hpp"

int main(int argc, char** argv) { return opekit::cli::run(argc, argv); }
