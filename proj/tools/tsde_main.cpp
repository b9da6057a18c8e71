#include "tsde/cli.hpp"

int main(int argc, char** argv) { return tsde::cli::run(argc, argv); }
