#pragma once

#include <string>
#include <vector>

namespace hloc {

/// Command-line front end. Returns the process exit code: 0 on success,
/// 2 on validation errors, 3 on I/O errors, 4 on anything unexpected.
int run_cli(int argc, const char* const* argv);

/// Same, for tests: arguments only, without the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace hloc
