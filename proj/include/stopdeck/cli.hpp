#pragma once

#include "stopdeck/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace stopdeck {

enum class Command { simulate, train, evaluate, compare, report };

Command parse_command(const std::string& text);

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

// Runs one subcommand with a fully resolved config, writing outputs into
// config.output_dir. Progress lines go to `log`. Throws on failure.
void run(Command command, const ExperimentConfig& config, std::ostream& log);

// Full command line (argv[0] included). Failures print one line
// `stopdeck: error: <config|runtime>: <reason>` to `err` and return the exit
// code; nothing escapes as an exception.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stopdeck
