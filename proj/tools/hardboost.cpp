#include "hardboost/cli.hpp"

int main(int argc, char** argv) { return hardboost::cli::dispatch(argc, argv); }
