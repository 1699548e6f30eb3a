#include "curricode/cli.hpp"

int main(int argc, char** argv) { return curricode::cli::run(argc, argv); }
