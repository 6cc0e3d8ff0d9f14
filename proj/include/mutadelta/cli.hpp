#pragma once

#include <string>
#include <vector>

namespace mutadelta::cli {

// Command-line entry point.  Subcommands: data gen|split|stats, pretrain,
// finetune, eval, explain, engineer, optimize.  Every Config key is exposed
// as a flag of the same name; --config loads a JSON file first and explicit
// flags override it.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace mutadelta::cli
