#ifndef FEATPINN_CLI_HPP
#define FEATPINN_CLI_HPP

#include <string>
#include <vector>

namespace featpinn::cli {

// Runs the command-line interface. Exit codes: 0 success, 1 runtime failure,
// 2 malformed configuration or arguments. Failures print a machine-readable
// error JSON to stdout.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

// Every registered flag/option name, for help-coverage checks.
std::vector<std::string> registered_flags();

// Top-level help plus every subcommand's help.
std::string full_help();

}  // namespace featpinn::cli

#endif  // FEATPINN_CLI_HPP
