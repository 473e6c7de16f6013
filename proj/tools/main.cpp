#include "repufit/cli.hpp"

int main(int argc, char** argv) { return repufit::cli::run(argc, argv); }
