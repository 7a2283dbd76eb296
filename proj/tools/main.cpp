#include "cli.hpp"

int main(int argc, char** argv) { return mvgb::cli::run(argc, argv); }
