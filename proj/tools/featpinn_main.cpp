#include "featpinn/cli.hpp"

int main(int argc, char** argv) { return featpinn::cli::run(argc, argv); }
