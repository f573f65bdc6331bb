#pragma once

#include <string>
#include <vector>

namespace twopass {

// Entry point for the `twopass` binary. Exit codes: 0 success, 1 validation
// error (bad flags, unreadable inputs, bad config), 2 runtime failure.
// Errors print as a single "error: ..." line on stderr.
int dispatch(int argc, const char* const* argv);
int dispatch(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace twopass
