#include "grasslens/cli.hpp"

int main(int argc, char** argv) { return grasslens::cli::run(argc, argv); }
