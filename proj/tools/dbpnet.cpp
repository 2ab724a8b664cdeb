#include "dbp/cli.hpp"

int main(int argc, char** argv) { return dbp::cli::run(argc, argv); }
