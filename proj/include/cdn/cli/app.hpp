#pragma once

#include <map>
#include <string>

namespace cdn::cli {

/// Entry point of the `cdn` executable. Returns 0 on success, 2 on usage
/// or configuration errors and 1 on runtime failures.
int run(int argc, char** argv);

/// "key = value" lines with '#' comments, as read by --config.
std::map<std::string, std::string> parse_key_values(const std::string& text);

}  // namespace cdn::cli
