#include "cli.hpp"

int main(int argc, char** argv) { return fracmin::cli::run(argc, argv, std::cout, std::cerr); }
