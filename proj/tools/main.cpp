#include "mutadelta/cli.hpp"

int main(int argc, char** argv) { return mutadelta::cli::run(argc, argv); }
