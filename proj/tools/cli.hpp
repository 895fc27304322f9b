#ifndef D2RNN_TOOLS_CLI_HPP
#define D2RNN_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "d2rnn/cells.hpp"

namespace d2rnn::cli {

/// lstm | rnn | stacked:L | drnn:N | d2rnn:L | dos:n
StackConfig parse_arch(const std::string& arch, int input_units, int state_units, int classes);

/// Runs one command line (without the program name). Returns the exit code:
/// 0 success, 1 usage, 2 data error, 3 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Name of the effective-config file written next to every command's output.
inline constexpr const char* kConfigEcho = "effective_config.toml";

}  // namespace d2rnn::cli

#endif  // D2RNN_TOOLS_CLI_HPP
