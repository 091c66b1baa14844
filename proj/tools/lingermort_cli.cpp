#include "lingermort/cli/cli.hpp"

int main(int argc, char** argv) { return lingermort::cli::run(argc, argv); }
