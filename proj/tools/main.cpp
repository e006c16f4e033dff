#include "bandit_clusters/cli.hpp"

int main(int argc, char** argv) { return bandits::cli_main(argc, argv); }
