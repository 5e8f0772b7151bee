#include "qou/cli.hpp"

int main(int argc, char** argv) { return qou::cli::run(argc, argv); }
